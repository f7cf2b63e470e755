// catcast - categorized volatility forecasting and backtesting pipeline.

#include "catcast/error.hpp"
#include "catcast/pipeline.hpp"
#include "catcast/util.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using namespace catcast;

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<int> frame_minutes;
    std::optional<std::string> basis;
};

void add_override_flags(CLI::App* cmd, ConfigOverrides& ov) {
    cmd->add_option("--seed", ov.seed, "Override the config seed");
    cmd->add_option("--mode", ov.mode, "Override the selector mode (markov|oracle|none)");
    cmd->add_option("--frame-minutes", ov.frame_minutes, "Override the frame length");
    cmd->add_option("--basis", ov.basis,
                    "Override the category basis (volatility_change|price_direction)");
}

pipeline::ExperimentConfig load_config(const std::string& path, const ConfigOverrides& ov) {
    pipeline::ExperimentConfig cfg = pipeline::parse_config_file(path);
    if (ov.seed)
        cfg.seed = *ov.seed;
    if (ov.mode)
        cfg.mode = pipeline::mode_from_name(*ov.mode);
    if (ov.frame_minutes)
        cfg.frame_minutes = *ov.frame_minutes;
    if (ov.basis)
        cfg.basis = cat::basis_from_name(*ov.basis);
    cfg.finalize();
    return cfg;
}

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path);
    require(out.good(), "cannot write ", path.string());
    out << text;
    out.flush();
    require(out.good(), "write failed for ", path.string());
}

void print_report_summary(std::ostream& os, const nlohmann::json& r) {
    const auto& m = r.at("metrics");
    const auto& b = r.at("backtest");
    const auto& s = r.at("selector");
    os << "target:            " << r.at("config").at("target").get<std::string>() << "\n";
    os << "mode:              " << s.at("mode").get<std::string>() << "\n";
    os << "steps:             " << r.at("steps").size() << "\n";
    os << "accuracy:          " << m.at("accuracy").get<double>() << "\n";
    os << "precision:         "
       << (m.at("precision").is_null() ? std::string("n/a (no bullish predictions)")
                                       : std::to_string(m.at("precision").get<double>()))
       << "\n";
    os << "selector accuracy: "
       << (s.at("accuracy").is_null() ? std::string("n/a")
                                      : std::to_string(s.at("accuracy").get<double>()))
       << "\n";
    os << "fallbacks:         " << s.at("fallback_count").get<std::size_t>() << "\n";
    os << "final value:       " << b.at("final_value").get<double>() << "\n";
    os << "buy and hold:      " << b.at("buy_and_hold").get<double>() << "\n";
    os << "trades:            " << b.at("trade_count").get<std::size_t>() << "\n";
}

int run_ingest(const std::string& input, const std::string& pair, const std::string& out) {
    market::FrameSeries s = market::parse_kline_file(input, pair);
    std::cout << pair << ": " << s.frames.size() << " one-minute frames, open_time "
              << s.frames.front().open_time << " .. " << s.frames.back().open_time << "\n";
    if (!out.empty()) {
        market::write_kline_file(s, out);
        std::cout << "normalized CSV written to " << out << "\n";
    }
    return 0;
}

int run_aggregate(const std::string& input, const std::string& pair, int minutes,
                  const std::string& out) {
    market::FrameSeries s = market::parse_kline_file(input, pair);
    market::FrameSeries agg = market::aggregate_frames(s, minutes);
    market::write_kline_file(agg, out);
    std::cout << pair << ": " << s.frames.size() << " frames -> " << agg.frames.size() << " at "
              << minutes << "m, written to " << out << "\n";
    return 0;
}

int run_dataset(const pipeline::ExperimentConfig& cfg, const std::string& out) {
    auto frames = pipeline::load_frames(cfg);
    cat::CategorizedDataset ds = pipeline::build_training_dataset(cfg, frames);
    cat::save_dataset(ds, out);
    std::cout << "dataset: " << ds.total_windows() << " windows in " << ds.nonempty_buckets()
              << " of " << ds.scheme.category_count() << " categories, hash "
              << hex_u64(cat::dataset_content_hash(ds)) << ", written to " << out << "\n";
    return 0;
}

int run_train(const pipeline::ExperimentConfig& cfg, const std::string& out_dir) {
    auto frames = pipeline::load_frames(cfg);
    pipeline::TrainOutput t = pipeline::train_all(cfg, frames);
    fs::create_directories(out_dir);
    cat::save_dataset(t.dataset, fs::path(out_dir) / "dataset");
    fc::save_store(t.store, fs::path(out_dir) / "models");
    if (t.selector)
        sel::save_selector(*t.selector, fs::path(out_dir) / "selector.txt");
    std::cout << "trained " << t.store.models.size() << " category models ("
              << t.empty_categories.size() << " categories unseen), dataset hash "
              << hex_u64(t.store.dataset_hash) << "\n";
    std::cout << "run directory: " << out_dir << "\n";
    return 0;
}

int run_evaluate(const pipeline::ExperimentConfig& cfg, const std::string& run_dir,
                 const std::string& report_path, const std::string& ledger_path,
                 bool timing) {
    auto frames = pipeline::load_frames(cfg);
    fc::ModelStore store = fc::load_store(fs::path(run_dir) / "models");
    std::optional<sel::TransitionModel> selector;
    const fs::path sel_path = fs::path(run_dir) / "selector.txt";
    if (fs::exists(sel_path))
        selector = sel::load_selector(sel_path);

    pipeline::RunReport rep =
        pipeline::walk_forward(cfg, store, selector ? &*selector : nullptr, frames);
    write_text_file(report_path, pipeline::report_to_json(rep, timing));
    if (!ledger_path.empty()) {
        std::ofstream out(ledger_path);
        require(out.good(), "cannot write ", ledger_path);
        bt::write_ledger_csv(rep.ledger, out);
    }

    print_report_summary(std::cout, nlohmann::json::parse(pipeline::report_to_json(rep)));
    std::cout << "wall clock:        " << rep.wall_clock_seconds << " s\n";
    std::cout << "report written to " << report_path << "\n";
    return 0;
}

int run_backtest_cmd(const std::string& closes_path, const std::string& directions_path,
                     double initial, double fee, bool no_liquidate,
                     const std::string& ledger_path) {
    auto read_lines = [](const std::string& path) {
        std::ifstream in(path);
        require(in.good(), "cannot open ", path);
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (!line.empty())
                lines.push_back(line);
        }
        return lines;
    };

    std::vector<double> closes;
    for (const auto& l : read_lines(closes_path))
        closes.push_back(std::stod(l));
    std::vector<bt::Direction> dirs;
    for (const auto& l : read_lines(directions_path)) {
        if (l == "up" || l == "1")
            dirs.push_back(bt::Direction::up);
        else if (l == "down" || l == "0")
            dirs.push_back(bt::Direction::down);
        else
            fail("direction file: expected up/down/1/0, got '", l, "'");
    }

    bt::BacktestConfig cfg;
    cfg.initial_quote = initial;
    cfg.fee_rate = fee;
    cfg.liquidate_at_end = !no_liquidate;
    bt::TradeLedger ledger = bt::run_backtest(dirs, closes, cfg);
    std::cout << "final value:  " << format_g17(ledger.final_value) << "\n";
    std::cout << "buy and hold: " << format_g17(bt::buy_and_hold(closes, cfg)) << "\n";
    std::cout << "trades:       " << ledger.trades.size() << "\n";
    if (!ledger_path.empty()) {
        std::ofstream out(ledger_path);
        require(out.good(), "cannot write ", ledger_path);
        bt::write_ledger_csv(ledger, out);
        std::cout << "ledger written to " << ledger_path << "\n";
    }
    return 0;
}

int run_synth(const std::string& kind, std::size_t length, std::uint64_t seed,
              const std::string& out) {
    market::FrameSeries s =
        pipeline::generate_synthetic(pipeline::synth_kind_from_name(kind), length, seed);
    market::write_kline_file(s, out);
    std::cout << s.pair_id << ": " << s.frames.size() << " frames written to " << out << "\n";
    return 0;
}

int run_report(const std::string& input) {
    std::ifstream in(input);
    require(in.good(), "cannot open ", input);
    nlohmann::json r = nlohmann::json::parse(in);
    require(r.value("format", "") == "catcast-report", "not a catcast report: ", input);
    print_report_summary(std::cout, r);
    if (r.contains("timing"))
        std::cout << "wall clock:        "
                  << r["timing"]["wall_clock_seconds"].get<double>() << " s\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"categorized volatility forecasting and trading backtest pipeline"};
    app.require_subcommand(1);

    std::string input, output, pair = "UNKNOWN", config_path, run_dir = "run";
    std::string report_path = "report.json", ledger_path, closes_path, directions_path;
    std::string kind = "random_walk";
    int frame_minutes = 7;
    std::size_t length = 1000;
    std::uint64_t seed = 0;
    double initial = 100.0, fee = 0.0;
    bool no_liquidate = false, timing = false;
    ConfigOverrides ov;

    auto* ingest = app.add_subcommand("ingest", "Parse and validate a 1-minute kline CSV");
    ingest->add_option("--input", input, "kline CSV path")->required();
    ingest->add_option("--pair", pair, "pair id (e.g. LTC-USDT)")->required();
    ingest->add_option("--out", output, "write a normalized copy here");

    auto* aggregate = app.add_subcommand("aggregate", "Resample a kline CSV to N minutes");
    aggregate->add_option("--input", input, "1-minute kline CSV")->required();
    aggregate->add_option("--pair", pair, "pair id")->required();
    aggregate->add_option("--frame-minutes", frame_minutes, "target frame length")->required();
    aggregate->add_option("--out", output, "output CSV path")->required();

    auto* dataset = app.add_subcommand("dataset", "Build the categorized window dataset");
    dataset->add_option("--config", config_path, "experiment config file")->required();
    dataset->add_option("--out", output, "dataset directory")->required();
    add_override_flags(dataset, ov);

    auto* train = app.add_subcommand("train", "Train category models and the selector");
    train->add_option("--config", config_path, "experiment config file")->required();
    train->add_option("--out", run_dir, "run directory for models/selector/dataset");
    add_override_flags(train, ov);

    auto* evaluate = app.add_subcommand("evaluate", "Walk-forward evaluation and backtest");
    evaluate->add_option("--config", config_path, "experiment config file")->required();
    evaluate->add_option("--run", run_dir, "run directory produced by train");
    evaluate->add_option("--report", report_path, "report JSON output path");
    evaluate->add_option("--ledger", ledger_path, "trade ledger CSV output path");
    evaluate->add_flag("--timing", timing, "include wall-clock in the report JSON");
    add_override_flags(evaluate, ov);

    auto* backtest = app.add_subcommand("backtest", "Backtest a direction sequence");
    backtest->add_option("--closes", closes_path, "file with one close per line")->required();
    backtest->add_option("--directions", directions_path, "file with up/down per line")
        ->required();
    backtest->add_option("--initial", initial, "initial quote balance");
    backtest->add_option("--fee", fee, "fee rate per side");
    backtest->add_flag("--no-liquidate", no_liquidate, "keep the final position open");
    backtest->add_option("--ledger", ledger_path, "trade ledger CSV output path");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic 1-minute kline CSV");
    synth->add_option("--kind", kind, "random_walk|deterministic_category|periodic");
    synth->add_option("--length", length, "number of frames");
    synth->add_option("--seed", seed, "generator seed");
    synth->add_option("--out", output, "output CSV path")->required();

    auto* report = app.add_subcommand("report", "Summarize a report JSON");
    report->add_option("--input", input, "report JSON path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest)
            return run_ingest(input, pair, output);
        if (*aggregate)
            return run_aggregate(input, pair, frame_minutes, output);
        if (*dataset)
            return run_dataset(load_config(config_path, ov), output);
        if (*train)
            return run_train(load_config(config_path, ov), run_dir);
        if (*evaluate)
            return run_evaluate(load_config(config_path, ov), run_dir, report_path,
                                ledger_path, timing);
        if (*backtest)
            return run_backtest_cmd(closes_path, directions_path, initial, fee, no_liquidate,
                                    ledger_path);
        if (*synth)
            return run_synth(kind, length, seed, output);
        if (*report)
            return run_report(input);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
