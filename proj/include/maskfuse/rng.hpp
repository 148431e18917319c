#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace maskfuse {

// std::mt19937_64 output is pinned by the standard, but the <random>
// distributions are not, so every draw we depend on for reproducibility goes
// through the helpers below instead.

/// Uniform double in [0,1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo,hi).
inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

/// Uniform index in [0,n). Modulo bias is irrelevant at the n we use
/// (n << 2^64) and keeps the draw a single RNG step.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

/// Standard normal via Box-Muller; consumes exactly two RNG draws.
inline double normal_unit(std::mt19937_64& rng) {
    double u1 = 0.0;
    do {
        u1 = uniform_unit(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform_unit(rng);
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace maskfuse
