#pragma once

#include "catcast/backtest.hpp"
#include "catcast/categorize.hpp"
#include "catcast/forecaster.hpp"
#include "catcast/market_data.hpp"
#include "catcast/preprocess.hpp"
#include "catcast/selector.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace catcast::pipeline {

enum class SelectorMode {
    markov, // 2^(n-1) categories, Markov chain picks the next one
    oracle, // ground-truth selector, upper-bound experiments only
    none,   // 2^(n-2) categories, the forecaster resolves the final step itself
};

const char* mode_name(SelectorMode m);
SelectorMode mode_from_name(const std::string& name);

struct AssetSpec {
    std::string pair_id;
    std::filesystem::path csv_path;
};

// One experiment: which 1-minute kline files to pool, which asset to
// predict, how to frame/categorize, the forecaster and backtest settings,
// and the timestamp-based train/test split.
struct ExperimentConfig {
    std::vector<AssetSpec> assets;
    std::string target;
    int frame_minutes = 7;
    std::size_t window_len = 8;
    cat::Basis basis = cat::Basis::volatility_change;
    SelectorMode mode = SelectorMode::markov;
    double alpha = 1.0;          // selector smoothing
    bool selector_online = true; // keep updating the selector during the test walk
    fc::ForecasterConfig forecaster;
    bt::BacktestConfig backtest;
    std::int64_t train_end_ms = 0;   // frames with open_time < train_end_ms train
    std::int64_t test_start_ms = 0;  // predicted frames in [test_start, test_end) evaluate
    std::int64_t test_end_ms = 0;
    std::uint64_t seed = 0;
    std::size_t threads = 0; // 0 = hardware concurrency

    cat::CategoryScheme scheme() const;
    // Derives forecaster.input_len/seed from window_len/seed, then validates.
    void finalize();
    void validate() const;
};

// Documented key-value text format, one "key = value" per line, '#'
// comments; "asset = PAIR:path" may repeat.
ExperimentConfig parse_config_file(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text);

// Ingest + aggregate every configured asset to config.frame_minutes.
std::map<std::string, market::FrameSeries> load_frames(const ExperimentConfig& config);

struct TrainOutput {
    fc::ModelStore store;
    std::optional<sel::TransitionModel> selector; // absent in none mode
    cat::CategorizedDataset dataset;
    std::vector<cat::CategoryId> empty_categories;
};

// Preprocess + categorize over the training range only; no model training.
cat::CategorizedDataset build_training_dataset(
    const ExperimentConfig& config,
    const std::map<std::string, market::FrameSeries>& frames);

// Algorithm: pool training windows across assets, train one forecaster per
// non-empty category (fanned out over threads), fit the Markov selector on
// the target asset's category sequence.
TrainOutput train_all(const ExperimentConfig& config,
                      const std::map<std::string, market::FrameSeries>& frames);
TrainOutput train_all(const ExperimentConfig& config); // loads frames itself

struct Prediction {
    std::optional<cat::CategoryId> current_category; // markov/oracle modes
    std::optional<cat::CategoryId> chosen_category;
    double predicted_v = 0.0;
    bt::Direction direction = bt::Direction::down;
    double selector_probability = 0.0; // 0 when no selector was consulted
    bool fallback = false;             // naive baseline used (unseen category)
};

// One step: window holds the last window_len observed volatility values.
// markov: categorize -> selector -> category model on the last n-1 values.
// oracle: ground-truth category (oracle_truth) -> its model.
// none:   k = n-2 id of the observed values -> its model directly.
// A missing category model falls back to naive_baseline, flagged.
Prediction predict_one(const fc::ModelStore& store, const sel::TransitionModel* selector,
                       std::span<const double> window, SelectorMode mode,
                       std::optional<cat::CategoryId> oracle_truth = std::nullopt);

struct StepRecord {
    std::size_t value_index = 0;      // index into the volatility series
    std::int64_t open_time = 0;       // of the predicted frame
    std::optional<cat::CategoryId> current_category;
    std::optional<cat::CategoryId> chosen_category;
    std::optional<cat::CategoryId> realized_category;
    double predicted_v = 0.0;
    double realized_v = 0.0;
    bt::Direction direction = bt::Direction::down;
    bool fallback = false;
};

struct RunReport {
    ExperimentConfig config;
    std::uint64_t dataset_hash = 0;
    std::string kernel_backend;
    std::vector<StepRecord> steps;
    bt::DirectionMetrics metrics;
    std::optional<double> selector_accuracy; // absent in none mode
    std::size_t fallback_count = 0;
    bt::TradeLedger ledger;
    double final_value = 0.0;
    double buy_and_hold_value = 0.0;
    double wall_clock_seconds = 0.0; // reported separately; not in canonical JSON
};

// Frozen forecasters, optionally online-updating selector. Directions feed
// the all-in backtest over the same test range.
RunReport walk_forward(const ExperimentConfig& config, const fc::ModelStore& store,
                       const sel::TransitionModel* selector,
                       const std::map<std::string, market::FrameSeries>& frames);

// Canonical report serialization: byte-identical for identical
// config+seed+data. Wall-clock is only emitted when include_timing is set,
// since it would break replay equality.
std::string report_to_json(const RunReport& report, bool include_timing = false);

enum class SynthKind {
    random_walk,            // log-normal price steps
    deterministic_category, // next volatility a fixed function of the current category
    periodic,               // smooth sine closes
};

const char* synth_kind_name(SynthKind k);
SynthKind synth_kind_from_name(const std::string& name);

// 1-minute synthetic kline series for tests and the acceptance harness.
market::FrameSeries generate_synthetic(SynthKind kind, std::size_t length, std::uint64_t seed);

} // namespace catcast::pipeline
