#include "catcast/market_data.hpp"

#include "catcast/error.hpp"
#include "catcast/util.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace catcast::market {

namespace {

constexpr std::int64_t kMsPerMinute = 60'000;

bool parse_double(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

bool parse_int(std::string_view s, std::int64_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

void check_kline(const Kline& k, std::size_t row) {
    require(k.open > 0 && k.high > 0 && k.low > 0 && k.close > 0,
            "row ", row, ": prices must be positive");
    require(k.low <= std::min(k.open, k.close), "row ", row, ": low above open/close");
    require(k.high >= std::max(k.open, k.close), "row ", row, ": high below open/close");
    require(k.volume >= 0 && k.quote_asset_volume >= 0 && k.num_trades >= 0 &&
                k.taker_buy_base >= 0 && k.taker_buy_quote >= 0,
            "row ", row, ": volumes and counts must be non-negative");
    require(k.open_time < k.close_time, "row ", row, ": open_time not before close_time");
}

} // namespace

FrameSeries parse_kline_csv(std::istream& in, const std::string& pair_id) {
    FrameSeries series;
    series.pair_id = pair_id;
    series.frame_minutes = 1;

    // Row numbers are 1-based over physical lines, header included.
    std::vector<std::pair<Kline, std::size_t>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto fields = split_fields(line);
        if (first_content) {
            first_content = false;
            double probe;
            if (!parse_double(fields[0], probe))
                continue; // header row
        }
        require(fields.size() == 12, "row ", line_no, ": expected 12 columns, got ",
                fields.size());
        Kline k;
        bool ok = parse_int(fields[0], k.open_time) && parse_double(fields[1], k.open) &&
                  parse_double(fields[2], k.high) && parse_double(fields[3], k.low) &&
                  parse_double(fields[4], k.close) && parse_double(fields[5], k.volume) &&
                  parse_int(fields[6], k.close_time) &&
                  parse_double(fields[7], k.quote_asset_volume) &&
                  parse_int(fields[8], k.num_trades) &&
                  parse_double(fields[9], k.taker_buy_base) &&
                  parse_double(fields[10], k.taker_buy_quote);
        // fields[11] is the documented "ignore" column.
        require(ok, "row ", line_no, ": malformed kline row");
        check_kline(k, line_no);
        rows.emplace_back(k, line_no);
    }
    require(!rows.empty(), "empty kline input for ", pair_id);

    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.first.open_time < b.first.open_time;
    });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        require(rows[i].first.open_time != rows[i - 1].first.open_time,
                "duplicate open_time ", rows[i].first.open_time, " (rows ",
                rows[i - 1].second, " and ", rows[i].second, ")");
        require(rows[i].first.open_time - rows[i - 1].first.open_time == kMsPerMinute,
                "gap before row ", rows[i].second, ": open_time jumps from ",
                rows[i - 1].first.open_time, " to ", rows[i].first.open_time);
    }

    series.frames.reserve(rows.size());
    for (auto& [k, n] : rows)
        series.frames.push_back(k);
    return series;
}

FrameSeries parse_kline_file(const std::filesystem::path& path, const std::string& pair_id) {
    std::ifstream in(path);
    require(in.good(), "cannot open ", path.string());
    return parse_kline_csv(in, pair_id);
}

void validate_series(const FrameSeries& series) {
    require(series.frame_minutes > 0, "frame_minutes must be positive");
    const std::int64_t step = static_cast<std::int64_t>(series.frame_minutes) * kMsPerMinute;
    for (std::size_t i = 0; i < series.frames.size(); ++i) {
        check_kline(series.frames[i], i + 1);
        if (i > 0)
            require(series.frames[i].open_time - series.frames[i - 1].open_time == step,
                    "frame ", i, ": series has a gap or is unsorted");
    }
}

FrameSeries aggregate_frames(const FrameSeries& series, int n_minutes) {
    require(!series.frames.empty(), "cannot aggregate an empty series");
    require(n_minutes > 0 && n_minutes % series.frame_minutes == 0,
            "aggregation target ", n_minutes, "m is not a multiple of the input granularity ",
            series.frame_minutes, "m");
    validate_series(series);

    const std::size_t block = static_cast<std::size_t>(n_minutes / series.frame_minutes);
    FrameSeries out;
    out.pair_id = series.pair_id;
    out.frame_minutes = n_minutes;
    const std::size_t blocks = series.frames.size() / block;
    out.frames.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        const Kline* first = &series.frames[b * block];
        Kline agg = *first;
        for (std::size_t i = 1; i < block; ++i) {
            const Kline& k = first[i];
            agg.high = std::max(agg.high, k.high);
            agg.low = std::min(agg.low, k.low);
            agg.volume += k.volume;
            agg.quote_asset_volume += k.quote_asset_volume;
            agg.num_trades += k.num_trades;
            agg.taker_buy_base += k.taker_buy_base;
            agg.taker_buy_quote += k.taker_buy_quote;
        }
        agg.close = first[block - 1].close;
        agg.close_time = first[block - 1].close_time;
        out.frames.push_back(agg);
    }
    return out;
}

void write_kline_csv(const FrameSeries& series, std::ostream& out) {
    out << "open_time,open,high,low,close,volume,close_time,"
           "quote_asset_volume,num_trades,taker_buy_base,taker_buy_quote,ignore\n";
    for (const Kline& k : series.frames) {
        out << k.open_time << ',' << format_g17(k.open) << ',' << format_g17(k.high) << ','
            << format_g17(k.low) << ',' << format_g17(k.close) << ',' << format_g17(k.volume)
            << ',' << k.close_time << ',' << format_g17(k.quote_asset_volume) << ','
            << k.num_trades << ',' << format_g17(k.taker_buy_base) << ','
            << format_g17(k.taker_buy_quote) << ",0\n";
    }
}

void write_kline_file(const FrameSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write ", path.string());
    write_kline_csv(series, out);
    out.flush();
    require(out.good(), "write failed for ", path.string());
}

} // namespace catcast::market
