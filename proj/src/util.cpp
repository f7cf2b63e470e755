#include "catcast/util.hpp"

#include <cmath>
#include <cstdio>

namespace catcast {

std::string hex_u64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double normal_unit(std::mt19937_64& rng) {
    double u1 = uniform_unit(rng);
    double u2 = uniform_unit(rng);
    while (u1 <= 0.0) // avoid log(0)
        u1 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace catcast
