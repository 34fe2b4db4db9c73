#pragma once

#include <cstdint>
#include <random>

namespace pbsim {

/// Random source shared by every stochastic operation.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of stream `index` under `master`.
///
/// stream_seed(master, i) = mix64(mix64(master) + (i + 1) * 0x9E3779B97F4A7C15).
/// Each repetition seeds an mt19937_64 with this value, so any implementation
/// with the same generator reproduces the per-repetition streams.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(mix64(master) + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Always consumes one draw so streams stay aligned across parameter values.
inline bool bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p;
}

}  // namespace pbsim
