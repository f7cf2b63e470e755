#pragma once

#include "catcast/categorize.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace catcast::sel {

// Markov chain over categories. Stride-1 categorization means each category
// can only move to its two shift successors, so the whole chain reduces to
// one new-bit outcome per current category. Counts are Laplace-smoothed with
// alpha, and the model can keep learning online during evaluation.
struct TransitionModel {
    cat::CategoryScheme scheme;
    std::vector<std::array<std::int64_t, 2>> counts; // [category][new bit]
    double alpha = 1.0;

    // (counts[c][b] + alpha) / (counts[c][0] + counts[c][1] + 2*alpha).
    // With alpha = 0 and no observations the prediction degrades to 0.5.
    double prob_bit(cat::CategoryId c, int bit) const;

    // Higher-probability successor; ties pick the bit-0 successor.
    std::pair<cat::CategoryId, double> predict_next(cat::CategoryId c) const;

    void update_online(cat::CategoryId from, cat::CategoryId to);
};

TransitionModel empty_model(const cat::CategoryScheme& scheme, double alpha = 1.0);

// Tallies transitions of a stride-1 category sequence. A pair that is not a
// shift successor signals mixed series or stride != 1 and is an error.
TransitionModel fit(std::span<const cat::CategoryId> sequence,
                    const cat::CategoryScheme& scheme, double alpha = 1.0);

// Evaluation-only upper bound: returns the ground-truth next category.
cat::CategoryId oracle_select(cat::CategoryId truth);

void save_selector(const TransitionModel& model, const std::filesystem::path& path);
TransitionModel load_selector(const std::filesystem::path& path);

} // namespace catcast::sel
