// Acceptance suite. Each criterion prints one [PASS]/[FAIL] line; the exit
// code is the number of failures. Run without arguments for all criteria or
// pass a list of ids (e.g. "acceptance 1 4 7").

#include "catcast/backtest.hpp"
#include "catcast/categorize.hpp"
#include "catcast/forecaster.hpp"
#include "catcast/kernels.hpp"
#include "catcast/market_data.hpp"
#include "catcast/pipeline.hpp"
#include "catcast/preprocess.hpp"
#include "catcast/selector.hpp"
#include "catcast/util.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

using namespace catcast;

namespace {

constexpr std::int64_t kEpoch = 1609459200000;
constexpr std::int64_t kMinute = 60'000;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

bool check(std::ostream& log, bool ok, const std::string& what) {
    if (!ok)
        log << "    FAILED: " << what << "\n";
    return ok;
}

market::FrameSeries flat_series(const std::vector<double>& closes) {
    market::FrameSeries s;
    s.pair_id = "ACC";
    s.frame_minutes = 1;
    for (std::size_t t = 0; t < closes.size(); ++t) {
        market::Kline k;
        k.open_time = kEpoch + static_cast<std::int64_t>(t) * kMinute;
        k.close_time = k.open_time + 59'999;
        k.open = t == 0 ? closes[0] : closes[t - 1];
        k.close = closes[t];
        k.high = std::max(k.open, k.close) * 1.0001;
        k.low = std::min(k.open, k.close) * 0.9999;
        k.volume = 1.0;
        k.quote_asset_volume = k.close;
        k.num_trades = 1;
        k.taker_buy_base = 0.5;
        k.taker_buy_quote = 0.5 * k.close;
        s.frames.push_back(k);
    }
    return s;
}

// 1. Successor law over 1e5 stride-1 random-walk windows, < 5 s.
bool criterion_1(std::ostream& log) {
    Timer timer;
    auto series = pipeline::generate_synthetic(pipeline::SynthKind::random_walk, 100'008, 801);
    auto windows = prep::sliding_windows(prep::to_volatility(series), 8);
    bool ok = check(log, windows.size() == 100'000, "expected 1e5 windows");

    const cat::CategoryScheme scheme{8, 7, cat::Basis::volatility_change};
    std::size_t violations = 0;
    cat::CategoryId prev = cat::categorize(windows[0].values, scheme);
    for (std::size_t i = 1; i < windows.size(); ++i) {
        const cat::CategoryId cur = cat::categorize(windows[i].values, scheme);
        const auto [lo, hi] = cat::successors(prev, scheme);
        violations += cur != lo && cur != hi;
        prev = cur;
    }
    ok &= check(log, violations == 0,
                "successor-law violations: " + std::to_string(violations));
    ok &= check(log, timer.seconds() < 5.0,
                "runtime " + std::to_string(timer.seconds()) + " s exceeds 5 s");
    return ok;
}

// 2. Volatility round trip over 1e6 random prices, max rel error < 1e-9.
bool criterion_2(std::ostream& log) {
    std::mt19937_64 rng(802);
    const std::size_t n = 1'000'000;
    std::vector<double> closes(n);
    // Independent log-uniform prices over two decades; consecutive ratios
    // span 1e-2..1e2, i.e. volatility values up to +-9900%.
    for (auto& p : closes)
        p = std::exp(uniform_unit(rng) * std::log(100.0));

    auto vol = prep::to_volatility(flat_series(closes));
    double max_rel = 0.0;
    double rebuilt = vol.base_prices[0];
    for (std::size_t t = 0; t < vol.values.size(); ++t) {
        rebuilt *= 1.0 + vol.values[t] / 100.0;
        max_rel = std::max(max_rel, std::abs(rebuilt - closes[t + 1]) / closes[t + 1]);
    }
    return check(log, max_rel < 1e-9,
                 "max relative reconstruction error " + format_g17(max_rel));
}

// 3. Aggregation invariants on a 14-day 1-minute fixture, exact.
bool criterion_3(std::ostream& log) {
    const std::size_t n = 20'165; // 14 days of minutes plus a ragged tail of 5
    auto series = pipeline::generate_synthetic(pipeline::SynthKind::random_walk, n, 803);
    auto agg = market::aggregate_frames(series, 7);

    bool ok = check(log, agg.frames.size() == n / 7,
                    "frame count != floor(N/7): " + std::to_string(agg.frames.size()));

    double vol_in = 0, vol_out = 0;
    std::int64_t trades_in = 0, trades_out = 0;
    for (std::size_t i = 0; i < agg.frames.size() * 7; ++i) {
        vol_in += series.frames[i].volume;
        trades_in += series.frames[i].num_trades;
    }
    for (const auto& f : agg.frames) {
        vol_out += f.volume;
        trades_out += f.num_trades;
    }
    ok &= check(log, trades_in == trades_out, "trade-count conservation is not exact");
    ok &= check(log, std::abs(vol_in - vol_out) <= 1e-9 * vol_in,
                "volume conservation beyond 1e-9 relative");

    for (std::size_t b = 0; ok && b < agg.frames.size(); ++b) {
        const market::Kline* blk = &series.frames[b * 7];
        double hi = blk[0].high, lo = blk[0].low;
        for (int i = 1; i < 7; ++i) {
            hi = std::max(hi, blk[i].high);
            lo = std::min(lo, blk[i].low);
        }
        ok &= agg.frames[b].high == hi && agg.frames[b].low == lo;
        ok &= agg.frames[b].open == blk[0].open && agg.frames[b].close == blk[6].close;
        ok &= agg.frames[b].open_time == blk[0].open_time;
    }
    ok = check(log, ok, "block extrema/endpoint equality is not exact");
    return ok;
}

// 4. Markov batch/online equivalence, deterministic accuracy 1.0, iid ~0.5.
bool criterion_4(std::ostream& log) {
    const cat::CategoryScheme scheme{8, 7, cat::Basis::volatility_change};
    std::mt19937_64 rng(804);

    std::vector<cat::CategoryId> seq{17};
    for (int i = 0; i < 10'000; ++i) {
        const auto [lo, hi] = cat::successors(seq.back(), scheme);
        seq.push_back((rng() & 1) ? hi : lo);
    }
    sel::TransitionModel whole = sel::fit(seq, scheme);
    const std::size_t cut = seq.size() / 3;
    sel::TransitionModel inc =
        sel::fit(std::span<const cat::CategoryId>(seq).first(cut), scheme);
    for (std::size_t i = cut - 1; i + 1 < seq.size(); ++i)
        inc.update_online(seq[i], seq[i + 1]);
    bool ok = check(log, inc.counts == whole.counts,
                    "batch and online count tables differ");

    // deterministic transitions reach accuracy 1.0
    auto det = pipeline::generate_synthetic(pipeline::SynthKind::deterministic_category,
                                            4'000, 11);
    auto windows = prep::sliding_windows(prep::to_volatility(det), 8);
    std::vector<cat::CategoryId> det_seq;
    for (const auto& w : windows)
        det_seq.push_back(cat::categorize(w.values, scheme));
    sel::TransitionModel dm =
        sel::fit(std::span<const cat::CategoryId>(det_seq).first(det_seq.size() / 2), scheme);
    std::size_t hits = 0, total = 0;
    for (std::size_t i = det_seq.size() / 2; i + 1 < det_seq.size(); ++i) {
        hits += dm.predict_next(det_seq[i]).first == det_seq[i + 1];
        ++total;
    }
    ok &= check(log, hits == total,
                "deterministic corpus accuracy " + std::to_string(static_cast<double>(hits) /
                                                                  static_cast<double>(total)));

    // iid random bits hover at a fair coin
    std::vector<cat::CategoryId> iid{3};
    for (int i = 0; i < 20'000; ++i) {
        const auto [lo, hi] = cat::successors(iid.back(), scheme);
        iid.push_back((rng() & 1) ? hi : lo);
    }
    sel::TransitionModel im =
        sel::fit(std::span<const cat::CategoryId>(iid).first(10'000), scheme);
    hits = 0;
    total = 0;
    for (std::size_t i = 10'000; i + 1 < iid.size() && total < 10'000; ++i) {
        hits += im.predict_next(iid[i]).first == iid[i + 1];
        ++total;
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(total);
    ok &= check(log, acc >= 0.45 && acc <= 0.55,
                "iid corpus accuracy " + std::to_string(acc) + " outside [0.45, 0.55]");
    return ok;
}

// 5. Gradient check on a small config, < 1e-4, < 30 s.
bool criterion_5(std::ostream& log) {
    Timer timer;
    fc::ForecasterConfig cfg;
    cfg.hidden_size = 8;
    cfg.recurrent_layers = 2;
    cfg.attention_heads = 2;
    cfg.seed = 805;

    std::mt19937_64 rng(806);
    fc::TrainingSample sample;
    for (int i = 0; i < 7; ++i) {
        sample.inputs.push_back(uniform_unit(rng) * 2.0 - 1.0);
        sample.positions.push_back(i + 1.0);
    }
    sample.target = 0.6;

    const double err = fc::gradient_check(cfg, sample, 1e-5);
    bool ok = check(log, err < 1e-4, "max relative gradient error " + format_g17(err));
    ok &= check(log, timer.seconds() < 30.0,
                "runtime " + std::to_string(timer.seconds()) + " s exceeds 30 s");
    log << "    max relative gradient error: " << format_g17(err) << "\n";
    return ok;
}

// 6. Overfit: 64 copies of one sample reach MSE < 1e-3 within 2000 epochs, < 60 s.
bool criterion_6(std::ostream& log) {
    Timer timer;
    fc::ForecasterConfig cfg;
    cfg.hidden_size = 8;
    cfg.recurrent_layers = 2;
    cfg.attention_heads = 2;
    cfg.learning_rate = 3e-3;
    cfg.batch_size = 32;
    cfg.epochs = 2000;
    cfg.seed = 807;

    std::mt19937_64 rng(808);
    fc::TrainingSample sample;
    for (int i = 0; i < 7; ++i) {
        sample.inputs.push_back(uniform_unit(rng) - 0.5);
        sample.positions.push_back(i + 1.0);
    }
    sample.target = -0.35;
    std::vector<fc::TrainingSample> samples(64, sample);

    fc::ForecasterParams params = fc::init(cfg);
    fc::TrainingReport rep = fc::train(params, samples);
    std::size_t first_epoch = rep.epoch_mean_loss.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < rep.epoch_mean_loss.size(); ++e) {
        best = std::min(best, rep.epoch_mean_loss[e]);
        if (rep.epoch_mean_loss[e] < 1e-3) {
            first_epoch = std::min(first_epoch, e);
        }
    }
    bool ok = check(log, best < 1e-3, "best epoch MSE " + format_g17(best));
    ok &= check(log, timer.seconds() < 60.0,
                "runtime " + std::to_string(timer.seconds()) + " s exceeds 60 s");
    if (first_epoch < rep.epoch_mean_loss.size())
        log << "    MSE < 1e-3 first reached at epoch " << first_epoch << "\n";
    return ok;
}

// 7. Full pipeline on the deterministic corpus: accuracy >= 0.95 and the
//    backtest strictly beats buy-and-hold, < 10 min.
bool criterion_7(std::ostream& log) {
    Timer timer;
    const std::size_t total_frames = 22'001; // 20k train steps + 2k test steps
    auto series = pipeline::generate_synthetic(pipeline::SynthKind::deterministic_category,
                                               total_frames, 2024);
    std::map<std::string, market::FrameSeries> frames{{series.pair_id, series}};

    pipeline::ExperimentConfig cfg;
    cfg.assets = {{series.pair_id, "synthetic"}};
    cfg.target = series.pair_id;
    cfg.frame_minutes = 1;
    cfg.mode = pipeline::SelectorMode::markov;
    cfg.train_end_ms = kEpoch + 20'000 * kMinute;
    cfg.test_start_ms = cfg.train_end_ms;
    cfg.test_end_ms = kEpoch + 22'000 * kMinute;
    cfg.seed = 809;
    cfg.forecaster.hidden_size = 32;
    cfg.forecaster.recurrent_layers = 2;
    cfg.forecaster.attention_heads = 4;
    cfg.forecaster.epochs = 10;
    cfg.forecaster.learning_rate = 3e-3;
    cfg.finalize();

    pipeline::TrainOutput out = pipeline::train_all(cfg, frames);
    pipeline::RunReport rep = pipeline::walk_forward(cfg, out.store, &*out.selector, frames);

    bool ok = check(log, rep.steps.size() == 2'000,
                    "expected 2000 test steps, got " + std::to_string(rep.steps.size()));
    ok &= check(log, rep.metrics.accuracy >= 0.95,
                "directional accuracy " + std::to_string(rep.metrics.accuracy));
    ok &= check(log, rep.final_value > rep.buy_and_hold_value,
                "final " + std::to_string(rep.final_value) + " does not beat buy-and-hold " +
                    std::to_string(rep.buy_and_hold_value));
    ok &= check(log, timer.seconds() < 600.0,
                "runtime " + std::to_string(timer.seconds()) + " s exceeds 10 min");
    log << "    accuracy " << rep.metrics.accuracy << ", selector accuracy "
        << (rep.selector_accuracy ? *rep.selector_accuracy : -1.0) << ", final "
        << rep.final_value << " vs buy-and-hold " << rep.buy_and_hold_value << "\n";
    return ok;
}

// 8. Backtest oracle: exact 3-price ledger and brute-force maximality (T=10).
bool criterion_8(std::ostream& log) {
    const std::vector<double> hand{100, 110, 99};
    const std::vector<bt::Direction> dirs{bt::Direction::up, bt::Direction::down};
    bt::TradeLedger ledger = bt::run_backtest(dirs, hand, {});
    bool ok = check(log, ledger.final_value == 110.0,
                    "hand ledger final " + format_g17(ledger.final_value));

    std::mt19937_64 rng(810);
    std::vector<double> closes;
    double p = 100;
    for (int i = 0; i < 11; ++i) {
        p *= 1.0 + (uniform_unit(rng) - 0.5) / 10.0;
        closes.push_back(p);
    }
    std::vector<bt::Direction> perfect;
    double formula = 100.0;
    for (std::size_t t = 0; t + 1 < closes.size(); ++t) {
        const bool up = closes[t + 1] > closes[t];
        perfect.push_back(up ? bt::Direction::up : bt::Direction::down);
        if (up)
            formula *= closes[t + 1] / closes[t];
    }
    const double best = bt::run_backtest(perfect, closes, {}).final_value;
    ok &= check(log, std::abs(best - formula) <= 1e-12 * formula,
                "perfect-foresight value differs from the up-step product");

    const std::size_t T = 10;
    for (std::size_t mask = 0; mask < (std::size_t{1} << T); ++mask) {
        std::vector<bt::Direction> d;
        for (std::size_t t = 0; t < T; ++t)
            d.push_back((mask >> t) & 1 ? bt::Direction::up : bt::Direction::down);
        const double v = bt::run_backtest(d, closes, {}).final_value;
        if (v > best * (1.0 + 1e-12)) {
            return check(log, false,
                         "direction mask " + std::to_string(mask) + " beats perfect foresight");
        }
    }
    return ok;
}

// 9. Buy-and-hold property across 100 random series.
bool criterion_9(std::ostream& log) {
    std::mt19937_64 rng(811);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t len = 2 + rng() % 60;
        std::vector<double> closes;
        double p = 10.0 + uniform_unit(rng) * 1000.0;
        for (std::size_t i = 0; i < len; ++i) {
            p *= 1.0 + (uniform_unit(rng) - 0.5) / 8.0;
            closes.push_back(p);
        }
        bt::BacktestConfig cfg;
        cfg.fee_rate = (trial % 10) * 0.001;
        const double got = bt::buy_and_hold(closes, cfg);
        const double want = 100.0 * (closes.back() / closes.front()) *
                            (1.0 - cfg.fee_rate) * (1.0 - cfg.fee_rate);
        if (std::abs(got - want) > 1e-9 * std::abs(want))
            return check(log, false, "trial " + std::to_string(trial) + ": " +
                                         format_g17(got) + " vs " + format_g17(want));
    }
    return true;
}

// 10. Byte-identical reports for two identical evaluate runs.
bool criterion_10(std::ostream& log) {
    auto run_once = [&](std::string& report_json, std::string& ledger_csv) {
        auto series = pipeline::generate_synthetic(
            pipeline::SynthKind::deterministic_category, 3'000, 55);
        std::map<std::string, market::FrameSeries> frames{{series.pair_id, series}};
        pipeline::ExperimentConfig cfg;
        cfg.assets = {{series.pair_id, "synthetic"}};
        cfg.target = series.pair_id;
        cfg.frame_minutes = 1;
        cfg.train_end_ms = kEpoch + 2'500 * kMinute;
        cfg.test_start_ms = cfg.train_end_ms;
        cfg.test_end_ms = kEpoch + 3'000 * kMinute;
        cfg.seed = 812;
        cfg.forecaster.hidden_size = 12;
        cfg.forecaster.recurrent_layers = 2;
        cfg.forecaster.attention_heads = 3;
        cfg.forecaster.epochs = 4;
        cfg.forecaster.learning_rate = 3e-3;
        cfg.finalize();

        pipeline::TrainOutput out = pipeline::train_all(cfg, frames);
        pipeline::RunReport rep =
            pipeline::walk_forward(cfg, out.store, &*out.selector, frames);
        report_json = pipeline::report_to_json(rep);
        std::ostringstream led;
        bt::write_ledger_csv(rep.ledger, led);
        ledger_csv = led.str();
    };

    std::string r1, l1, r2, l2;
    run_once(r1, l1);
    run_once(r2, l2);
    bool ok = check(log, r1 == r2, "report JSON differs between identical runs");
    ok &= check(log, l1 == l2, "ledger CSV differs between identical runs");
    ok &= check(log, !r1.empty(), "empty report");
    return ok;
}

struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::ostream&)> fn;
};

const Criterion kCriteria[] = {
    {1, "successor law on 1e5 random-walk windows", criterion_1},
    {2, "volatility round trip over 1e6 prices", criterion_2},
    {3, "aggregation invariants on a 14-day fixture", criterion_3},
    {4, "markov batch/online equivalence and accuracy bounds", criterion_4},
    {5, "forecaster gradient check", criterion_5},
    {6, "single-sample overfit", criterion_6},
    {7, "synthetic end-to-end pipeline", criterion_7},
    {8, "backtest oracle and brute-force maximality", criterion_8},
    {9, "buy-and-hold property", criterion_9},
    {10, "determinism of evaluate reports", criterion_10},
};

} // namespace

int main(int argc, char** argv) {
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i)
        ids.push_back(std::atoi(argv[i]));

    try {
        std::cout << "kernel backend: "
                  << kernels::backend_name(kernels::active_backend()) << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    int failures = 0;
    for (const auto& c : kCriteria) {
        if (!ids.empty() && std::find(ids.begin(), ids.end(), c.id) == ids.end())
            continue;
        Timer timer;
        std::ostringstream log;
        bool ok = false;
        try {
            ok = c.fn(log);
        } catch (const std::exception& e) {
            log << "    exception: " << e.what() << "\n";
        }
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.name << " ("
                  << std::fixed << std::setprecision(2) << timer.seconds() << " s)\n"
                  << log.str();
        std::cout.unsetf(std::ios::fixed);
        failures += !ok;
    }
    if (failures)
        std::cout << failures << " criterion(s) failed\n";
    else
        std::cout << "all acceptance criteria passed\n";
    return failures;
}
