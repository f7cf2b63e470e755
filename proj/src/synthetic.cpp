#include "catcast/pipeline.hpp"

#include "catcast/error.hpp"
#include "catcast/util.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace catcast::pipeline {

namespace {

constexpr std::int64_t kSynthEpochMs = 1609459200000; // 2021-01-01T00:00:00Z

market::FrameSeries dress_klines(const std::vector<double>& closes, const std::string& pair) {
    market::FrameSeries s;
    s.pair_id = pair;
    s.frame_minutes = 1;
    s.frames.reserve(closes.size());
    for (std::size_t t = 0; t < closes.size(); ++t) {
        market::Kline k;
        k.open_time = kSynthEpochMs + static_cast<std::int64_t>(t) * 60'000;
        k.close_time = k.open_time + 59'999;
        k.open = t == 0 ? closes[0] : closes[t - 1];
        k.close = closes[t];
        k.high = std::max(k.open, k.close) * 1.0002;
        k.low = std::min(k.open, k.close) * 0.9998;
        k.volume = 10.0 + static_cast<double>(t % 7);
        k.quote_asset_volume = k.volume * k.close;
        k.num_trades = 100 + static_cast<std::int64_t>(t % 13);
        k.taker_buy_base = k.volume * 0.5;
        k.taker_buy_quote = k.quote_asset_volume * 0.5;
        s.frames.push_back(k);
    }
    return s;
}

std::vector<double> random_walk_closes(std::size_t length, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> closes;
    closes.reserve(length);
    double price = 100.0;
    closes.push_back(price);
    for (std::size_t t = 1; t < length; ++t) {
        price *= std::exp(0.002 * normal_unit(rng));
        closes.push_back(price);
    }
    return closes;
}

std::vector<double> periodic_closes(std::size_t length) {
    std::vector<double> closes;
    closes.reserve(length);
    for (std::size_t t = 0; t < length; ++t)
        closes.push_back(100.0 * (1.0 + 0.05 * std::sin(2.0 * M_PI * static_cast<double>(t) / 97.0)));
    return closes;
}

// Repeating 12-step volatility ladder. Each phase of the cycle lands in its
// own (n=8, k=7) acceleration category, so the next volatility value is a
// fixed function of the current category: transitions are deterministic for
// the selector and every bucket's training target is constant.
std::vector<double> deterministic_pattern(std::uint64_t seed) {
    // 12 distinct magnitudes, 6 up / 6 down, mild net-down drift.
    const std::vector<double> base = {0.15, 0.30,  0.45,  0.60,  0.75,  0.90,
                                      -0.18, -0.33, -0.48, -0.63, -0.78, -0.93};
    const cat::CategoryScheme scheme{8, 7, cat::Basis::volatility_change};
    std::mt19937_64 rng(seed);
    std::vector<double> pattern = base;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        shuffle_portable(pattern, rng);
        std::set<cat::CategoryId> seen;
        bool ok = true;
        for (std::size_t phase = 0; phase < pattern.size() && ok; ++phase) {
            std::vector<double> window(8);
            for (std::size_t i = 0; i < 8; ++i)
                window[i] = pattern[(phase + i) % pattern.size()];
            ok = seen.insert(cat::categorize(window, scheme)).second;
        }
        if (ok)
            return pattern;
    }
    fail("deterministic_category: no valid pattern found for seed ", seed);
}

std::vector<double> deterministic_closes(std::size_t length, std::uint64_t seed) {
    const std::vector<double> pattern = deterministic_pattern(seed);
    std::vector<double> closes;
    closes.reserve(length);
    double price = 100.0;
    closes.push_back(price);
    for (std::size_t t = 1; t < length; ++t) {
        price *= 1.0 + pattern[(t - 1) % pattern.size()] / 100.0;
        closes.push_back(price);
    }
    return closes;
}

} // namespace

const char* synth_kind_name(SynthKind k) {
    switch (k) {
    case SynthKind::random_walk:
        return "random_walk";
    case SynthKind::deterministic_category:
        return "deterministic_category";
    case SynthKind::periodic:
        return "periodic";
    }
    return "?";
}

SynthKind synth_kind_from_name(const std::string& name) {
    if (name == "random_walk")
        return SynthKind::random_walk;
    if (name == "deterministic_category")
        return SynthKind::deterministic_category;
    if (name == "periodic")
        return SynthKind::periodic;
    fail("unknown synthetic kind '", name, "'");
}

market::FrameSeries generate_synthetic(SynthKind kind, std::size_t length, std::uint64_t seed) {
    require(length >= 2, "synthetic series needs at least 2 frames");
    std::vector<double> closes;
    std::string pair;
    switch (kind) {
    case SynthKind::random_walk:
        closes = random_walk_closes(length, seed);
        pair = "SYN-RW";
        break;
    case SynthKind::deterministic_category:
        closes = deterministic_closes(length, seed);
        pair = "SYN-DET";
        break;
    case SynthKind::periodic:
        closes = periodic_closes(length);
        pair = "SYN-PER";
        break;
    }
    return dress_klines(closes, pair);
}

} // namespace catcast::pipeline
