#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace lapin::rng {

// Counter-based generation: every draw is a pure function of (key, counter),
// so sample i never depends on how many workers produced samples 0..i-1.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash2(std::uint64_t key, std::uint64_t counter) {
    return splitmix64(splitmix64(key) ^ (counter * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
}

/// Seed of realization `index` under a master seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return hash2(master ^ 0xA0761D6478BD642FULL, index);
}

/// Uniform in the open interval (0, 1).
inline double uniform_at(std::uint64_t key, std::uint64_t counter) {
    const std::uint64_t bits = hash2(key, counter) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

/// Standard normal draw number `index` of stream `key` (Box-Muller, cosine branch).
inline double normal_at(std::uint64_t key, std::uint64_t index) {
    const double u1 = uniform_at(key, 2 * index);
    const double u2 = uniform_at(key, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace lapin::rng
