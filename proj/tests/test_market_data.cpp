#include "catcast/market_data.hpp"

#include "catcast/error.hpp"
#include "helpers.hpp"

#include <random>
#include <sstream>

#include <doctest.h>

using namespace catcast;
using market::FrameSeries;
using market::Kline;

namespace {

std::string rows_to_csv(const std::vector<std::string>& rows, bool header = false) {
    std::string out;
    if (header)
        out += "open_time,open,high,low,close,volume,close_time,qav,trades,tbb,tbq,ignore\n";
    for (const auto& r : rows)
        out += r + "\n";
    return out;
}

std::string minute_row(std::int64_t open_time, double open, double high, double low,
                       double close) {
    std::ostringstream os;
    os << open_time << ',' << open << ',' << high << ',' << low << ',' << close << ",12.5,"
       << open_time + 59'999 << ",712625,340,6.1,347890,0";
    return os.str();
}

} // namespace

TEST_CASE("parse_kline_csv maps the documented column layout") {
    std::istringstream in(
        "1638316800000,57000,57100,56900,57050,12.5,1638316859999,712625,340,6.1,347890,0\n");
    FrameSeries s = market::parse_kline_csv(in, "BTC-USDT");
    REQUIRE(s.frames.size() == 1);
    const Kline& k = s.frames[0];
    CHECK(k.open_time == 1638316800000);
    CHECK(k.open == 57000.0);
    CHECK(k.high == 57100.0);
    CHECK(k.low == 56900.0);
    CHECK(k.close == 57050.0);
    CHECK(k.volume == 12.5);
    CHECK(k.close_time == 1638316859999);
    CHECK(k.quote_asset_volume == 712625.0);
    CHECK(k.num_trades == 340);
    CHECK(k.taker_buy_base == 6.1);
    CHECK(k.taker_buy_quote == 347890.0);
    CHECK(s.frame_minutes == 1);
    CHECK(s.pair_id == "BTC-USDT");
}

TEST_CASE("parse_kline_csv auto-detects a header row") {
    std::istringstream in(rows_to_csv({minute_row(1638316800000, 100, 101, 99, 100.5)}, true));
    CHECK(market::parse_kline_csv(in, "X").frames.size() == 1);
}

TEST_CASE("parse_kline_csv rejects a row with high below low") {
    std::istringstream in(rows_to_csv({
        minute_row(1638316800000, 100, 101, 99, 100.5),
        "1638316860000,100,99,101,100,1,1638316919999,1,1,0,0,0", // high < low
    }));
    CHECK_THROWS_WITH_AS(market::parse_kline_csv(in, "X"),
                         doctest::Contains("row 2"), Error);
}

TEST_CASE("parse_kline_csv rejects duplicate open_times") {
    std::istringstream in(rows_to_csv({
        minute_row(1638316800000, 100, 101, 99, 100.5),
        minute_row(1638316800000, 100.5, 102, 100, 101),
    }));
    CHECK_THROWS_WITH_AS(market::parse_kline_csv(in, "X"),
                         doctest::Contains("duplicate open_time"), Error);
}

TEST_CASE("parse_kline_csv rejects empty input and gaps") {
    std::istringstream empty("");
    CHECK_THROWS_WITH_AS(market::parse_kline_csv(empty, "X"), doctest::Contains("empty"),
                         Error);

    std::istringstream gap(rows_to_csv({
        minute_row(1638316800000, 100, 101, 99, 100.5),
        minute_row(1638316920000, 100.5, 102, 100, 101), // 2 minutes later
    }));
    CHECK_THROWS_WITH_AS(market::parse_kline_csv(gap, "X"), doctest::Contains("gap"), Error);
}

TEST_CASE("parse_kline_csv sorts rows by open_time") {
    std::istringstream in(rows_to_csv({
        minute_row(1638316860000, 100.5, 102, 100, 101),
        minute_row(1638316800000, 100, 101, 99, 100.5),
    }));
    FrameSeries s = market::parse_kline_csv(in, "X");
    REQUIRE(s.frames.size() == 2);
    CHECK(s.frames[0].open_time == 1638316800000);
}

TEST_CASE("parse_kline_csv reports malformed rows") {
    std::istringstream in("1638316800000,notanumber,1,1,1,1,1638316859999,1,1,1,1,0\n");
    CHECK_THROWS_WITH_AS(market::parse_kline_csv(in, "X"), doctest::Contains("row 1"), Error);
    std::istringstream short_row("1638316800000,1,1,1\n");
    CHECK_THROWS_WITH_AS(market::parse_kline_csv(short_row, "X"),
                         doctest::Contains("12 columns"), Error);
}

TEST_CASE("aggregate_frames: 14 one-minute frames at 7 minutes") {
    std::mt19937_64 rng(42);
    std::vector<double> closes;
    double p = 100;
    for (int i = 0; i < 14; ++i) {
        p *= 1.0 + ((static_cast<double>(rng() >> 11) * 0x1.0p-53) - 0.5) / 100.0;
        closes.push_back(p);
    }
    FrameSeries s = testutil::series_from_closes(closes);
    FrameSeries agg = market::aggregate_frames(s, 7);

    REQUIRE(agg.frames.size() == 2);
    CHECK(agg.frame_minutes == 7);

    double hi = s.frames[0].high, lo = s.frames[0].low, vol = 0;
    std::int64_t trades = 0;
    for (int i = 0; i < 7; ++i) {
        hi = std::max(hi, s.frames[i].high);
        lo = std::min(lo, s.frames[i].low);
        vol += s.frames[i].volume;
        trades += s.frames[i].num_trades;
    }
    CHECK(agg.frames[0].high == hi);
    CHECK(agg.frames[0].low == lo);
    CHECK(agg.frames[0].volume == doctest::Approx(vol).epsilon(1e-12));
    CHECK(agg.frames[0].num_trades == trades);
    CHECK(agg.frames[0].open == s.frames[0].open);
    CHECK(agg.frames[0].close == s.frames[6].close);
    CHECK(agg.frames[0].open_time == s.frames[0].open_time);
    CHECK(agg.frames[0].close_time == s.frames[6].close_time);
    CHECK(agg.frames[1].open == s.frames[7].open);
    CHECK(agg.frames[1].close == s.frames[13].close);
}

TEST_CASE("aggregate_frames: identity when target equals input granularity") {
    FrameSeries s = testutil::series_from_closes({100, 101, 102});
    FrameSeries agg = market::aggregate_frames(s, 1);
    REQUIRE(agg.frames.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(agg.frames[i].open_time == s.frames[i].open_time);
        CHECK(agg.frames[i].close == s.frames[i].close);
        CHECK(agg.frames[i].volume == s.frames[i].volume);
    }
}

TEST_CASE("aggregate_frames: trailing partial block is dropped") {
    std::vector<double> closes(13, 100.0);
    FrameSeries agg = market::aggregate_frames(testutil::series_from_closes(closes), 7);
    CHECK(agg.frames.size() == 1); // floor(13/7)
}

TEST_CASE("aggregate_frames: errors") {
    FrameSeries s = testutil::series_from_closes({100, 101, 102});
    s.frame_minutes = 2; // 2m frames cannot build 7m blocks
    CHECK_THROWS_AS(market::aggregate_frames(s, 7), Error);
    FrameSeries empty;
    empty.frame_minutes = 1;
    CHECK_THROWS_AS(market::aggregate_frames(empty, 7), Error);
}

TEST_CASE("aggregate_frames: volume conservation and count over a random fixture") {
    std::mt19937_64 rng(7);
    std::vector<double> closes;
    double p = 50;
    for (int i = 0; i < 1000; ++i) {
        p *= 1.0 + ((static_cast<double>(rng() >> 11) * 0x1.0p-53) - 0.5) / 50.0;
        closes.push_back(p);
    }
    FrameSeries s = testutil::series_from_closes(closes);
    for (auto& f : s.frames)
        f.volume = static_cast<double>(rng() % 1000) / 7.0;

    FrameSeries agg = market::aggregate_frames(s, 7);
    CHECK(agg.frames.size() == 1000 / 7);

    double in_vol = 0, out_vol = 0;
    for (std::size_t i = 0; i < agg.frames.size() * 7; ++i)
        in_vol += s.frames[i].volume;
    for (const auto& f : agg.frames)
        out_vol += f.volume;
    CHECK(out_vol == doctest::Approx(in_vol).epsilon(1e-9));
}

TEST_CASE("kline CSV round trip through write_kline_csv") {
    FrameSeries s = testutil::series_from_closes({100.25, 101.5, 99.875, 100.0});
    std::ostringstream out;
    market::write_kline_csv(s, out);
    std::istringstream in(out.str());
    FrameSeries back = market::parse_kline_csv(in, s.pair_id);
    REQUIRE(back.frames.size() == s.frames.size());
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
        CHECK(back.frames[i].open_time == s.frames[i].open_time);
        CHECK(back.frames[i].close == s.frames[i].close);
        CHECK(back.frames[i].high == s.frames[i].high);
        CHECK(back.frames[i].volume == s.frames[i].volume);
        CHECK(back.frames[i].num_trades == s.frames[i].num_trades);
    }
}
