#include "catcast/pipeline.hpp"

#include "catcast/error.hpp"
#include "catcast/json_writer.hpp"
#include "catcast/kernels.hpp"
#include "catcast/util.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace catcast::pipeline {

const char* mode_name(SelectorMode m) {
    switch (m) {
    case SelectorMode::markov:
        return "markov";
    case SelectorMode::oracle:
        return "oracle";
    case SelectorMode::none:
        return "none";
    }
    return "?";
}

SelectorMode mode_from_name(const std::string& name) {
    if (name == "markov")
        return SelectorMode::markov;
    if (name == "oracle")
        return SelectorMode::oracle;
    if (name == "none")
        return SelectorMode::none;
    fail("unknown selector mode '", name, "' (expected markov|oracle|none)");
}

cat::CategoryScheme ExperimentConfig::scheme() const {
    return {window_len,
            mode == SelectorMode::none ? window_len - 2 : window_len - 1, basis};
}

void ExperimentConfig::finalize() {
    forecaster.input_len = window_len - 1;
    forecaster.output_len = 1;
    forecaster.seed = seed;
    validate();
}

void ExperimentConfig::validate() const {
    require(!assets.empty(), "config lists no assets");
    for (std::size_t i = 0; i < assets.size(); ++i) {
        require(!assets[i].pair_id.empty(), "asset ", i, " has an empty pair id");
        for (std::size_t j = i + 1; j < assets.size(); ++j)
            require(assets[i].pair_id != assets[j].pair_id, "duplicate asset ",
                    assets[i].pair_id);
    }
    const bool target_listed = std::any_of(assets.begin(), assets.end(), [&](const auto& a) {
        return a.pair_id == target;
    });
    require(target_listed, "target '", target, "' is not among the configured assets");
    require(frame_minutes >= 1, "frame_minutes must be positive");
    require(window_len >= 3, "window_len must be at least 3");
    require(alpha >= 0, "alpha must be non-negative");
    require(test_start_ms >= train_end_ms,
            "test range must start at or after the end of the train range");
    require(test_end_ms > test_start_ms, "test range is empty");
    require(forecaster.input_len == window_len - 1,
            "forecaster input_len must be window_len-1 (call finalize())");
    forecaster.validate();
    backtest.validate();
    scheme().validate();
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1")
        return true;
    if (v == "false" || v == "0")
        return false;
    fail("config key '", key, "': expected true/false, got '", v, "'");
}

template <class T>
T parse_num(const std::string& v, const std::string& key) {
    std::istringstream is(v);
    T out;
    is >> out;
    require(!is.fail() && is.eof(), "config key '", key, "': malformed number '", v, "'");
    return out;
}

std::uint64_t derive_category_seed(std::uint64_t base, cat::CategoryId c) {
    return base ^ (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(c) + 1));
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, "config line ", line_no, ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        require(!key.empty() && !value.empty(), "config line ", line_no,
                ": empty key or value");

        if (key == "asset") {
            const auto colon = value.find(':');
            require(colon != std::string::npos && colon > 0 && colon + 1 < value.size(),
                    "config line ", line_no, ": asset must be PAIR:path");
            cfg.assets.push_back({trim(value.substr(0, colon)), trim(value.substr(colon + 1))});
        } else if (key == "target") {
            cfg.target = value;
        } else if (key == "frame_minutes") {
            cfg.frame_minutes = parse_num<int>(value, key);
        } else if (key == "window_len") {
            cfg.window_len = parse_num<std::size_t>(value, key);
        } else if (key == "basis") {
            cfg.basis = cat::basis_from_name(value);
        } else if (key == "mode") {
            cfg.mode = mode_from_name(value);
        } else if (key == "alpha") {
            cfg.alpha = parse_num<double>(value, key);
        } else if (key == "selector_online") {
            cfg.selector_online = parse_bool(value, key);
        } else if (key == "train_end") {
            cfg.train_end_ms = parse_num<std::int64_t>(value, key);
        } else if (key == "test_start") {
            cfg.test_start_ms = parse_num<std::int64_t>(value, key);
        } else if (key == "test_end") {
            cfg.test_end_ms = parse_num<std::int64_t>(value, key);
        } else if (key == "seed") {
            cfg.seed = parse_num<std::uint64_t>(value, key);
        } else if (key == "threads") {
            cfg.threads = parse_num<std::size_t>(value, key);
        } else if (key == "hidden_size") {
            cfg.forecaster.hidden_size = parse_num<std::size_t>(value, key);
        } else if (key == "recurrent_layers") {
            cfg.forecaster.recurrent_layers = parse_num<std::size_t>(value, key);
        } else if (key == "attention_heads") {
            cfg.forecaster.attention_heads = parse_num<std::size_t>(value, key);
        } else if (key == "epochs") {
            cfg.forecaster.epochs = parse_num<std::size_t>(value, key);
        } else if (key == "learning_rate") {
            cfg.forecaster.learning_rate = parse_num<double>(value, key);
        } else if (key == "batch_size") {
            cfg.forecaster.batch_size = parse_num<std::size_t>(value, key);
        } else if (key == "loss") {
            cfg.forecaster.loss = fc::loss_from_name(value);
        } else if (key == "quantiles") {
            cfg.forecaster.quantiles.clear();
            std::istringstream qs(value);
            std::string tok;
            while (std::getline(qs, tok, ','))
                cfg.forecaster.quantiles.push_back(parse_num<double>(trim(tok), key));
        } else if (key == "initial_quote") {
            cfg.backtest.initial_quote = parse_num<double>(value, key);
        } else if (key == "fee_rate") {
            cfg.backtest.fee_rate = parse_num<double>(value, key);
        } else if (key == "liquidate_at_end") {
            cfg.backtest.liquidate_at_end = parse_bool(value, key);
        } else {
            fail("config line ", line_no, ": unknown key '", key, "'");
        }
    }
    cfg.finalize();
    return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open config file ", path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::map<std::string, market::FrameSeries> load_frames(const ExperimentConfig& config) {
    std::map<std::string, market::FrameSeries> frames;
    for (const auto& asset : config.assets) {
        market::FrameSeries minute = market::parse_kline_file(asset.csv_path, asset.pair_id);
        frames.emplace(asset.pair_id, config.frame_minutes == 1
                                          ? std::move(minute)
                                          : market::aggregate_frames(minute, config.frame_minutes));
    }
    return frames;
}

namespace {

market::FrameSeries train_slice(const market::FrameSeries& series, std::int64_t train_end_ms) {
    market::FrameSeries out;
    out.pair_id = series.pair_id;
    out.frame_minutes = series.frame_minutes;
    for (const auto& f : series.frames) {
        if (f.open_time >= train_end_ms)
            break;
        out.frames.push_back(f);
    }
    return out;
}

std::vector<fc::TrainingSample> bucket_samples(const std::vector<prep::Window>& bucket,
                                               std::size_t n) {
    std::vector<fc::TrainingSample> samples;
    samples.reserve(bucket.size());
    for (const auto& w : bucket) {
        fc::TrainingSample s;
        s.inputs.assign(w.values.begin(), w.values.end() - 1);
        s.positions.resize(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i)
            s.positions[i] = static_cast<double>(i + 1);
        s.target = w.values.back();
        samples.push_back(std::move(s));
    }
    return samples;
}

} // namespace

cat::CategorizedDataset build_training_dataset(
    const ExperimentConfig& config,
    const std::map<std::string, market::FrameSeries>& frames) {
    ExperimentConfig cfg = config;
    cfg.finalize();
    const std::size_t n = cfg.window_len;

    std::map<std::string, std::vector<prep::Window>> windows_per_asset;
    for (const auto& [pair_id, series] : frames) {
        market::FrameSeries train_part = train_slice(series, cfg.train_end_ms);
        if (train_part.frames.size() < n + 1)
            continue; // not enough history to cut a single window
        prep::VolatilitySeries vol = prep::to_volatility(train_part);
        windows_per_asset.emplace(pair_id, prep::sliding_windows(vol, n));
    }
    require(!windows_per_asset.empty(), "no usable windows in the training range");
    require(windows_per_asset.count(cfg.target),
            "target asset '", cfg.target, "' has no usable training windows");
    return cat::build_dataset(windows_per_asset, cfg.scheme());
}

TrainOutput train_all(const ExperimentConfig& config,
                      const std::map<std::string, market::FrameSeries>& frames) {
    ExperimentConfig cfg = config;
    cfg.finalize();
    const cat::CategoryScheme scheme = cfg.scheme();
    const std::size_t n = cfg.window_len;

    TrainOutput out;
    out.dataset = build_training_dataset(cfg, frames);
    out.store.scheme = scheme;
    out.store.config = cfg.forecaster;
    out.store.dataset_hash = cat::dataset_content_hash(out.dataset);

    std::vector<cat::CategoryId> cats;
    for (std::size_t c = 0; c < out.dataset.buckets.size(); ++c) {
        if (out.dataset.buckets[c].empty())
            out.empty_categories.push_back(static_cast<cat::CategoryId>(c));
        else
            cats.push_back(static_cast<cat::CategoryId>(c));
    }

    std::vector<std::vector<fc::TrainingSample>> samples(cats.size());
    for (std::size_t i = 0; i < cats.size(); ++i)
        samples[i] = bucket_samples(out.dataset.buckets[cats[i]], n);

    std::vector<fc::ForecasterParams> trained(cats.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cats.size())
                return;
            try {
                fc::ForecasterConfig fcfg = cfg.forecaster;
                fcfg.seed = derive_category_seed(cfg.seed, cats[i]);
                fc::ForecasterParams params = fc::init(fcfg);
                try {
                    fc::train(params, samples[i]);
                } catch (const std::exception& e) {
                    fail("category ", cats[i], ": ", e.what());
                }
                trained[i] = std::move(params);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error)
                    first_error = std::current_exception();
                return;
            }
        }
    };

    std::size_t nthreads = cfg.threads ? cfg.threads
                                       : std::max(1u, std::thread::hardware_concurrency());
    nthreads = std::min(nthreads, cats.size());
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (std::size_t i = 0; i < nthreads; ++i)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (first_error)
        std::rethrow_exception(first_error);

    for (std::size_t i = 0; i < cats.size(); ++i)
        out.store.models.emplace(cats[i], std::move(trained[i]));

    if (cfg.mode != SelectorMode::none) {
        const auto& seq = out.dataset.asset_sequences.at(cfg.target);
        out.selector = sel::fit(seq, scheme, cfg.alpha);
    }
    return out;
}

TrainOutput train_all(const ExperimentConfig& config) {
    return train_all(config, load_frames(config));
}

Prediction predict_one(const fc::ModelStore& store, const sel::TransitionModel* selector,
                       std::span<const double> window, SelectorMode mode,
                       std::optional<cat::CategoryId> oracle_truth) {
    const cat::CategoryScheme& scheme = store.scheme;
    require(window.size() == scheme.window_len, "prediction window has ", window.size(),
            " values, scheme expects ", scheme.window_len);

    Prediction p;
    cat::CategoryId target_cat = 0;
    switch (mode) {
    case SelectorMode::markov: {
        require(selector != nullptr, "markov mode needs a transition model");
        require(scheme.bit_count == scheme.window_len - 1,
                "markov mode expects a window_len-1 bit scheme");
        const cat::CategoryId c = cat::categorize(window, scheme);
        p.current_category = c;
        const auto [nc, prob] = selector->predict_next(c);
        target_cat = nc;
        p.selector_probability = prob;
        break;
    }
    case SelectorMode::oracle: {
        require(oracle_truth.has_value(), "oracle mode needs the ground-truth category");
        require(scheme.bit_count == scheme.window_len - 1,
                "oracle mode expects a window_len-1 bit scheme");
        p.current_category = cat::categorize(window, scheme);
        target_cat = sel::oracle_select(*oracle_truth);
        p.selector_probability = 1.0;
        break;
    }
    case SelectorMode::none: {
        require(scheme.bit_count == scheme.window_len - 2,
                "no-selector mode expects a window_len-2 bit scheme");
        target_cat = cat::categorize_prefix(window, scheme);
        break;
    }
    }

    p.chosen_category = target_cat;
    std::span<const double> model_in = window.subspan(1);
    if (store.has_model(target_cat)) {
        p.predicted_v = fc::predict_step(store, target_cat, model_in);
    } else {
        p.predicted_v = fc::naive_baseline(model_in);
        p.fallback = true;
    }
    p.direction = p.predicted_v > 0.0 ? bt::Direction::up : bt::Direction::down;
    return p;
}

RunReport walk_forward(const ExperimentConfig& config, const fc::ModelStore& store,
                       const sel::TransitionModel* selector,
                       const std::map<std::string, market::FrameSeries>& frames) {
    const auto t_start = std::chrono::steady_clock::now();
    ExperimentConfig cfg = config;
    cfg.finalize();
    const cat::CategoryScheme scheme = cfg.scheme();
    require(store.scheme == scheme, "model store scheme does not match the config");

    const auto it = frames.find(cfg.target);
    require(it != frames.end(), "target asset '", cfg.target, "' missing from the data");
    const market::FrameSeries& series = it->second;
    const prep::VolatilitySeries vol = prep::to_volatility(series);
    const std::vector<double>& v = vol.values;
    const std::vector<double>& closes = vol.base_prices;
    const std::size_t n = cfg.window_len;

    // v[j] is realized at frames[j+1]; a step is predictable once n trailing
    // values exist. Frames are gap-free, so the step range is contiguous.
    std::size_t j0 = v.size(), j1 = 0;
    for (std::size_t j = n; j < v.size(); ++j) {
        const std::int64_t t = series.frames[j + 1].open_time;
        if (t >= cfg.test_start_ms && t < cfg.test_end_ms) {
            j0 = std::min(j0, j);
            j1 = std::max(j1, j);
        }
    }
    require(j0 <= j1 && j0 < v.size(),
            "insufficient test data: no predictable frames in the test range");

    sel::TransitionModel live;
    const bool use_selector = cfg.mode == SelectorMode::markov;
    if (use_selector) {
        require(selector != nullptr, "markov mode needs a trained selector");
        live = *selector;
    }

    RunReport rep;
    rep.config = cfg;
    rep.dataset_hash = store.dataset_hash;
    rep.kernel_backend = kernels::backend_name(kernels::active_backend());

    std::vector<bt::Direction> directions;
    std::vector<double> realized;
    directions.reserve(j1 - j0 + 1);
    realized.reserve(j1 - j0 + 1);
    std::size_t selector_hits = 0;
    std::size_t selector_total = 0;

    for (std::size_t j = j0; j <= j1; ++j) {
        const std::span<const double> window(&v[j - n], n);
        std::optional<cat::CategoryId> realized_cat;
        if (cfg.mode != SelectorMode::none)
            realized_cat = cat::categorize(std::span<const double>(&v[j - n + 1], n), scheme);

        const Prediction pred =
            predict_one(store, use_selector ? &live : nullptr, window, cfg.mode,
                        cfg.mode == SelectorMode::oracle ? realized_cat : std::nullopt);

        if (realized_cat && pred.chosen_category) {
            ++selector_total;
            selector_hits += *pred.chosen_category == *realized_cat;
        }
        if (use_selector && cfg.selector_online)
            live.update_online(*pred.current_category, *realized_cat);

        StepRecord rec;
        rec.value_index = j;
        rec.open_time = series.frames[j + 1].open_time;
        rec.current_category = pred.current_category;
        rec.chosen_category = pred.chosen_category;
        rec.realized_category = realized_cat;
        rec.predicted_v = pred.predicted_v;
        rec.realized_v = v[j];
        rec.direction = pred.direction;
        rec.fallback = pred.fallback;
        rep.steps.push_back(rec);
        rep.fallback_count += pred.fallback;

        directions.push_back(pred.direction);
        realized.push_back(v[j]);
    }

    rep.metrics = bt::direction_metrics(directions, realized);
    const std::span<const double> closes_slice(&closes[j0], j1 - j0 + 2);
    rep.ledger = bt::run_backtest(directions, closes_slice, cfg.backtest);
    rep.final_value = rep.ledger.final_value;
    rep.buy_and_hold_value = bt::buy_and_hold(closes_slice, cfg.backtest);
    if (cfg.mode != SelectorMode::none && selector_total > 0)
        rep.selector_accuracy = static_cast<double>(selector_hits) /
                                static_cast<double>(selector_total);

    rep.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

std::string report_to_json(const RunReport& report, bool include_timing) {
    const ExperimentConfig& c = report.config;
    JsonWriter w;
    w.begin_object();
    w.field("format", "catcast-report");
    w.field("version", 1);

    w.key("config");
    w.begin_object();
    w.key("assets");
    w.begin_array();
    for (const auto& a : c.assets) {
        w.begin_object();
        w.field("pair_id", a.pair_id);
        w.field("path", a.csv_path.string());
        w.end_object();
    }
    w.end_array();
    w.field("target", c.target);
    w.field("frame_minutes", c.frame_minutes);
    w.field("window_len", c.window_len);
    w.field("basis", cat::basis_name(c.basis));
    w.field("mode", mode_name(c.mode));
    w.field("alpha", c.alpha);
    w.field("selector_online", c.selector_online);
    w.field("train_end", c.train_end_ms);
    w.field("test_start", c.test_start_ms);
    w.field("test_end", c.test_end_ms);
    w.field("seed", c.seed);
    w.field("threads", c.threads);
    w.key("forecaster");
    w.begin_object();
    w.field("input_len", c.forecaster.input_len);
    w.field("output_len", c.forecaster.output_len);
    w.field("hidden_size", c.forecaster.hidden_size);
    w.field("recurrent_layers", c.forecaster.recurrent_layers);
    w.field("attention_heads", c.forecaster.attention_heads);
    w.field("epochs", c.forecaster.epochs);
    w.field("learning_rate", c.forecaster.learning_rate);
    w.field("batch_size", c.forecaster.batch_size);
    w.field("loss", fc::loss_name(c.forecaster.loss));
    w.key("quantiles");
    w.begin_array();
    for (double q : c.forecaster.quantiles)
        w.value(q);
    w.end_array();
    w.end_object();
    w.key("backtest");
    w.begin_object();
    w.field("initial_quote", c.backtest.initial_quote);
    w.field("fee_rate", c.backtest.fee_rate);
    w.field("liquidate_at_end", c.backtest.liquidate_at_end);
    w.end_object();
    w.end_object();

    w.field("dataset_hash", hex_u64(report.dataset_hash));
    w.field("kernel_backend", report.kernel_backend);

    w.key("selector");
    w.begin_object();
    w.field("mode", mode_name(c.mode));
    w.field("online_updates", c.selector_online && c.mode == SelectorMode::markov);
    w.key("accuracy");
    if (report.selector_accuracy)
        w.value(*report.selector_accuracy);
    else
        w.null();
    w.field("fallback_count", report.fallback_count);
    w.end_object();

    w.key("metrics");
    w.begin_object();
    w.field("tp", report.metrics.tp);
    w.field("fp", report.metrics.fp);
    w.field("tn", report.metrics.tn);
    w.field("fn", report.metrics.fn);
    w.field("accuracy", report.metrics.accuracy);
    w.key("precision");
    if (report.metrics.precision)
        w.value(*report.metrics.precision);
    else
        w.null();
    w.end_object();

    w.key("backtest");
    w.begin_object();
    w.field("initial_quote", report.ledger.initial_quote);
    w.field("final_value", report.final_value);
    w.field("buy_and_hold", report.buy_and_hold_value);
    w.field("trade_count", report.ledger.trades.size());
    w.field("liquidated_at_end", report.ledger.liquidated_at_end);
    w.end_object();

    w.key("steps");
    w.begin_array();
    for (const auto& s : report.steps) {
        w.begin_object();
        w.field("index", s.value_index);
        w.field("open_time", s.open_time);
        w.key("current_category");
        if (s.current_category)
            w.value(static_cast<std::int64_t>(*s.current_category));
        else
            w.null();
        w.key("chosen_category");
        if (s.chosen_category)
            w.value(static_cast<std::int64_t>(*s.chosen_category));
        else
            w.null();
        w.key("realized_category");
        if (s.realized_category)
            w.value(static_cast<std::int64_t>(*s.realized_category));
        else
            w.null();
        w.field("predicted_v", s.predicted_v);
        w.field("realized_v", s.realized_v);
        w.field("direction", s.direction == bt::Direction::up ? "up" : "down");
        w.field("fallback", s.fallback);
        w.end_object();
    }
    w.end_array();

    if (include_timing) {
        w.key("timing");
        w.begin_object();
        w.field("wall_clock_seconds", report.wall_clock_seconds);
        w.end_object();
    }
    w.end_object();
    std::string out = w.take();
    out += '\n';
    return out;
}

} // namespace catcast::pipeline
