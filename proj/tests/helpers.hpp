#pragma once

#include "catcast/market_data.hpp"

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

namespace testutil {

struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("catcast_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

// Gap-free 1-minute series with valid OHLC around the given closes.
inline catcast::market::FrameSeries series_from_closes(const std::vector<double>& closes,
                                                       const std::string& pair = "TEST") {
    catcast::market::FrameSeries s;
    s.pair_id = pair;
    s.frame_minutes = 1;
    for (std::size_t t = 0; t < closes.size(); ++t) {
        catcast::market::Kline k;
        k.open_time = 1'600'000'000'000 + static_cast<std::int64_t>(t) * 60'000;
        k.close_time = k.open_time + 59'999;
        k.open = t == 0 ? closes[0] : closes[t - 1];
        k.close = closes[t];
        k.high = std::max(k.open, k.close) * 1.001;
        k.low = std::min(k.open, k.close) * 0.999;
        k.volume = 5.0;
        k.quote_asset_volume = k.volume * k.close;
        k.num_trades = 10;
        k.taker_buy_base = 2.0;
        k.taker_buy_quote = 2.0 * k.close;
        s.frames.push_back(k);
    }
    return s;
}

} // namespace testutil
