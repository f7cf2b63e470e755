#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace catcast {

// FNV-1a, used for dataset/config content hashes. Stable across platforms.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex_u64(std::uint64_t v);

// Shortest text form that round-trips a double exactly (%.17g).
std::string format_g17(double v);

// Uniform in [0, 1) from the top 53 bits of a mt19937_64 draw. The standard
// pins the engine's bit stream but not the distributions, so seeded results
// stay identical across standard libraries only if we map bits ourselves.
inline double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on uniform_unit (same portability reason).
double normal_unit(std::mt19937_64& rng);

// Fisher-Yates with engine bits, again to keep shuffles reproducible
// independent of the standard library.
template <class T>
void shuffle_portable(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace catcast
