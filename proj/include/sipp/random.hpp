#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace sipp {

// std::mt19937_64 output is fully specified by the standard, the library
// distributions are not; these helpers keep sampled results identical
// across standard library implementations.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Independent substream seed for (master, layer, group).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t layer, std::uint64_t group) {
    return splitmix64(splitmix64(splitmix64(master) ^ layer) ^ (group * 0xD1B54A32D192ED03ull));
}

/// Uniform double in [0, 1) with 53 random bits.
// Engine for a user-facing seed. Nearby raw seeds give visibly dependent
// Mersenne Twister streams, so the seed is scrambled first.
inline std::mt19937_64 seeded_engine(std::uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound), bound > 0, without modulo bias.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

/// Standard normal via Box-Muller.
inline double standard_normal(std::mt19937_64& rng) {
    double u1;
    do {
        u1 = uniform01(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace sipp
