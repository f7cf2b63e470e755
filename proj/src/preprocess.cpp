#include "catcast/preprocess.hpp"

#include "catcast/error.hpp"

#include <algorithm>

namespace catcast::prep {

VolatilitySeries to_volatility(const market::FrameSeries& series) {
    require(series.frames.size() >= 2, "need at least 2 frames for a volatility series (",
            series.pair_id, " has ", series.frames.size(), ")");
    VolatilitySeries out;
    out.pair_id = series.pair_id;
    out.frame_minutes = series.frame_minutes;
    out.base_prices.reserve(series.frames.size());
    for (const auto& f : series.frames) {
        require(f.close > 0, "non-positive close in ", series.pair_id);
        out.base_prices.push_back(f.close);
    }
    out.values.reserve(series.frames.size() - 1);
    for (std::size_t t = 0; t + 1 < out.base_prices.size(); ++t)
        out.values.push_back((out.base_prices[t + 1] / out.base_prices[t] - 1.0) * 100.0);
    return out;
}

std::vector<Window> sliding_windows(const VolatilitySeries& series, std::size_t n) {
    require(n >= 2, "window length must be at least 2");
    require(series.values.size() >= n, "series ", series.pair_id, " has ", series.values.size(),
            " values, shorter than window length ", n);
    std::vector<Window> windows;
    windows.reserve(series.values.size() - n + 1);
    for (std::size_t start = 0; start + n <= series.values.size(); ++start) {
        Window w;
        w.values.assign(series.values.begin() + start, series.values.begin() + start + n);
        w.pair_id = series.pair_id;
        w.start_index = start;
        windows.push_back(std::move(w));
    }
    return windows;
}

std::vector<double> normalize_capped(std::span<const double> values, double reference_max) {
    require(reference_max > 0, "reference_max must be positive");
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) {
        require(v >= 0, "normalize_capped expects non-negative values");
        out.push_back(std::min(v / reference_max, 1.0));
    }
    return out;
}

RatioFeatures ratio_features(const market::FrameSeries& series) {
    require(series.frames.size() >= 2, "need at least 2 frames for ratio features");
    RatioFeatures out;
    const std::size_t n = series.frames.size() - 1;
    out.ratio_open.reserve(n);
    out.ratio_high.reserve(n);
    out.ratio_low.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double prev_close = series.frames[t].close;
        require(prev_close > 0, "non-positive close at frame ", t);
        out.ratio_open.push_back(series.frames[t + 1].open / prev_close);
        out.ratio_high.push_back(series.frames[t + 1].high / prev_close);
        out.ratio_low.push_back(series.frames[t + 1].low / prev_close);
    }
    return out;
}

} // namespace catcast::prep
