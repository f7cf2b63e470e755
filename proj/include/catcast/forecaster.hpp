#pragma once

#include "catcast/categorize.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace catcast::fc {

enum class Loss { mse, quantile };

const char* loss_name(Loss l);
Loss loss_from_name(const std::string& name);

// Single-variable sequence regressor in the TFT mold: per-step affine
// embedding of (value, position), a stack of LSTM layers, a gated residual
// + layer norm, multi-head self-attention queried from the final step (the
// causal direction), a second gated residual + layer norm, and an affine
// head. Trained from scratch with mini-batch Adam.
struct ForecasterConfig {
    std::size_t input_len = 7;
    std::size_t output_len = 1;
    std::size_t hidden_size = 70;
    std::size_t recurrent_layers = 4;
    std::size_t attention_heads = 4;
    std::size_t epochs = 7;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    Loss loss = Loss::mse;
    std::vector<double> quantiles = {0.1, 0.5, 0.9};
    std::uint64_t seed = 0;

    // Per-head width is floor(hidden/heads); the output projection maps the
    // concatenated heads back to hidden_size, so hidden sizes that are not
    // multiples of the head count (70 with 4 heads) work unchanged.
    std::size_t head_dim() const { return hidden_size / attention_heads; }
    std::size_t output_count() const {
        return loss == Loss::quantile ? quantiles.size() : 1;
    }
    std::size_t median_index() const;
    void validate() const;
    bool operator==(const ForecasterConfig&) const = default;
};

struct TensorInfo {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
};

// All weights live in one flat array; layout describes the shape and offset
// of each named tensor. Serialization, Adam and the gradient checker all
// work on the flat view.
struct ForecasterParams {
    ForecasterConfig config;
    std::vector<TensorInfo> layout;
    std::vector<double> data;
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    std::size_t sample_count = 0;

    const TensorInfo& info(std::string_view name) const;
    std::span<double> tensor(std::string_view name);
    std::span<const double> tensor(std::string_view name) const;
};

struct TrainingSample {
    std::vector<double> inputs;    // n-1 volatility values
    std::vector<double> positions; // covariates 1..n-1
    double target = 0.0;           // the n-th volatility value
};

struct TrainingReport {
    std::vector<double> epoch_mean_loss;
};

// Deterministic for a given seed: weights uniform in +-1/sqrt(fan_in),
// biases zero, layer-norm scales one.
ForecasterParams init(const ForecasterConfig& config);

// Point prediction (median output in quantile mode).
double forward(const ForecasterParams& params, std::span<const double> inputs,
               std::span<const double> positions);

// All head outputs (size 1 for mse, one per quantile otherwise).
std::vector<double> forward_outputs(const ForecasterParams& params,
                                    std::span<const double> inputs,
                                    std::span<const double> positions);

// Loss of one sample plus the full parameter gradient (accumulated into
// grad, which must match params.data in size). Returns the loss.
double loss_and_gradient(const ForecasterParams& params, const TrainingSample& sample,
                         std::span<double> grad);

// Mini-batch Adam over shuffled epochs; per-epoch mean loss reported.
// Divergence (non-finite loss) reports the epoch index.
TrainingReport train(ForecasterParams& params, std::span<const TrainingSample> samples);

// Max relative error between the analytic gradient and central finite
// differences over every parameter.
double gradient_check(const ForecasterConfig& config, const TrainingSample& sample,
                      double fd_step = 1e-5);

// Versioned text format; load(save(p)) reproduces the decimal encoding
// bit-exactly.
void save(const ForecasterParams& params, const std::filesystem::path& path);
ForecasterParams load(const std::filesystem::path& path);

// Comparison floor and unseen-category fallback: the last observed value.
double naive_baseline(std::span<const double> last_values);

std::uint64_t config_hash(const ForecasterConfig& config);

// One trained forecaster per non-empty category.
struct ModelStore {
    cat::CategoryScheme scheme;
    ForecasterConfig config;
    std::uint64_t dataset_hash = 0;
    std::map<cat::CategoryId, ForecasterParams> models;

    bool has_model(cat::CategoryId c) const { return models.count(c) != 0; }
};

// Forward pass of the category's model with positions 1..n-1. Missing model
// is an error (callers fall back to naive_baseline).
double predict_step(const ModelStore& store, cat::CategoryId category,
                    std::span<const double> last_values);

void save_store(const ModelStore& store, const std::filesystem::path& dir);
ModelStore load_store(const std::filesystem::path& dir);

} // namespace catcast::fc
