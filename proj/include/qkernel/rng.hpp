#pragma once

// Reproducible randomness.
//
// All stochastic code draws from std::mt19937_64, whose output sequence is fixed by the
// C++ standard, and converts raw 64-bit words itself. Standard distributions are avoided
// because their algorithms are implementation-defined and would break cross-platform
// reproducibility of shot counts and dataset splits.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace qk {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to fan one seed out into independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic child seed for (base, stream, i, j). Order of evaluation never matters.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t i = 0,
                                    std::uint64_t j = 0) noexcept {
    std::uint64_t h = mix64(base);
    h = mix64(h ^ stream);
    h = mix64(h ^ i);
    h = mix64(h ^ j);
    return h;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection; bound > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

/// Standard normal via Box-Muller (cosine branch only, so each call consumes two words).
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = uniform_below(rng, i);
        std::iter_swap(first + (i - 1), first + j);
    }
}

}  // namespace qk
