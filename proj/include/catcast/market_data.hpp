#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace catcast::market {

// One exchange candlestick. Field order matches the public 12-column
// Binance kline CSV layout (the 12th "ignore" column is dropped).
struct Kline {
    std::int64_t open_time = 0;  // epoch ms
    std::int64_t close_time = 0; // epoch ms
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double volume = 0.0;             // base asset
    double quote_asset_volume = 0.0; // quote asset
    std::int64_t num_trades = 0;
    double taker_buy_base = 0.0;
    double taker_buy_quote = 0.0;
};

// Gap-free, strictly increasing candles at a fixed granularity.
struct FrameSeries {
    std::string pair_id;
    int frame_minutes = 1;
    std::vector<Kline> frames;
};

// Parses the 12-column Binance kline CSV:
//   open_time, open, high, low, close, volume, close_time,
//   quote_asset_volume, num_trades, taker_buy_base, taker_buy_quote, ignore
// A header row is auto-detected by a non-numeric first field. Rows are
// sorted by open_time; duplicates, malformed rows, invariant violations and
// gaps are errors carrying the offending row number.
FrameSeries parse_kline_csv(std::istream& in, const std::string& pair_id);
FrameSeries parse_kline_file(const std::filesystem::path& path, const std::string& pair_id);

// Resamples to n_minutes candles over non-overlapping blocks anchored at the
// first frame. open/close come from block endpoints, high/low are block
// extrema, volumes and trade counts are summed. A trailing partial block is
// dropped.
FrameSeries aggregate_frames(const FrameSeries& series, int n_minutes);

// Canonical 12-column output (header included, ignore column written as 0).
void write_kline_csv(const FrameSeries& series, std::ostream& out);
void write_kline_file(const FrameSeries& series, const std::filesystem::path& path);

void validate_series(const FrameSeries& series);

} // namespace catcast::market
