#pragma once

#include "catcast/market_data.hpp"

#include <span>
#include <string>
#include <vector>

namespace catcast::prep {

// Percent change of close price per frame: values[t] = (P_{t+1}/P_t - 1)*100.
// base_prices keeps the originating closes (one longer than values).
struct VolatilitySeries {
    std::string pair_id;
    int frame_minutes = 1;
    std::vector<double> values;
    std::vector<double> base_prices;
};

// n consecutive volatility values extracted at stride 1.
struct Window {
    std::vector<double> values;
    std::string pair_id;
    std::size_t start_index = 0; // index of values[0] in the parent series
};

VolatilitySeries to_volatility(const market::FrameSeries& series);

std::vector<Window> sliding_windows(const VolatilitySeries& series, std::size_t n);

// min(value/reference_max, 1) per element; inputs must be >= 0.
std::vector<double> normalize_capped(std::span<const double> values, double reference_max);

// open/high/low of each frame divided by the previous frame's close.
struct RatioFeatures {
    std::vector<double> ratio_open;
    std::vector<double> ratio_high;
    std::vector<double> ratio_low;
};

RatioFeatures ratio_features(const market::FrameSeries& series);

} // namespace catcast::prep
