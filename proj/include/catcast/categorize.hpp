#pragma once

#include "catcast/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace catcast::cat {

using CategoryId = std::uint32_t;

enum class Basis {
    volatility_change, // bit_i = values[i+1] > values[i]  (price acceleration)
    price_direction,   // bit_i = values[i] > 0
};

const char* basis_name(Basis b);
Basis basis_from_name(const std::string& name);

// k-bit direction pattern over windows of n volatility values. k = n-1 in
// selector modes, k = n-2 when the forecaster itself resolves the final
// step (the category then ignores the window's last value). The oldest
// comparison lands in the most significant bit, so sliding a window one
// step is a left shift plus one new low bit.
struct CategoryScheme {
    std::size_t window_len = 8;
    std::size_t bit_count = 7;
    Basis basis = Basis::volatility_change;

    std::size_t category_count() const { return std::size_t{1} << bit_count; }
    void validate() const;
    bool operator==(const CategoryScheme&) const = default;
};

// Encodes a full window of scheme.window_len values. Ties encode 0.
CategoryId categorize(std::span<const double> window, const CategoryScheme& scheme);

// Encodes the first bit_count+1 values of a window prefix (used at inference
// in no-selector mode, where only n-1 observed values are on hand).
CategoryId categorize_prefix(std::span<const double> values, const CategoryScheme& scheme);

// The only two categories reachable from c in one stride-1 step:
// ((2c) mod 2^k, (2c) mod 2^k + 1).
std::pair<CategoryId, CategoryId> successors(CategoryId c, const CategoryScheme& scheme);

// Windows pooled across assets, bucketed by category, plus each asset's
// time-ordered category sequence.
struct CategorizedDataset {
    CategoryScheme scheme;
    std::vector<std::vector<prep::Window>> buckets; // indexed by CategoryId
    std::map<std::string, std::vector<CategoryId>> asset_sequences;

    std::size_t total_windows() const;
    std::size_t nonempty_buckets() const;
};

CategorizedDataset build_dataset(
    const std::map<std::string, std::vector<prep::Window>>& windows_per_asset,
    const CategoryScheme& scheme);

// One bucket joined into a single training series with cycling 1..n
// position covariates.
struct CategoryTrainingSeries {
    CategoryId category = 0;
    std::vector<double> values;
    std::vector<double> positions;
};

CategoryTrainingSeries training_series(const CategorizedDataset& dataset, CategoryId c);

// Directory layout: manifest.json, categories/cat_NNN.txt (one window per
// line), sequences/<pair>.txt. The manifest records scheme, assets, window
// counts and an FNV-1a content hash over the canonical serialization.
void save_dataset(const CategorizedDataset& dataset, const std::filesystem::path& dir);
CategorizedDataset load_dataset(const std::filesystem::path& dir);
std::uint64_t dataset_content_hash(const CategorizedDataset& dataset);

} // namespace catcast::cat
