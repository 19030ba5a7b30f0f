#pragma once

// Reproducible random variates.
//
// std::mt19937_64 is bit-exact across standard libraries, but the std
// distributions are not, so variates are derived from raw engine output here.

#include <cmath>
#include <cstdint>
#include <random>

namespace amon {

using Engine = std::mt19937_64;

/// splitmix64 finalizer; used to expand one master seed into sub-seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Sub-seed number `index` of `master`. Distinct indices give unrelated seeds.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Engine& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1].
inline double uniform01_open_low(Engine& g) {
    return 1.0 - uniform01(g);
}

/// Uniform integer in [0, n). Lemire's multiply-high rejection method.
inline std::uint64_t uniform_below(Engine& g, std::uint64_t n) {
    if (n <= 1) return 0;
    unsigned __int128 prod = static_cast<unsigned __int128>(g()) * n;
    auto low = static_cast<std::uint64_t>(prod);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            prod = static_cast<unsigned __int128>(g()) * n;
            low = static_cast<std::uint64_t>(prod);
        }
    }
    return static_cast<std::uint64_t>(prod >> 64);
}

/// Standard exponential.
inline double exponential(Engine& g) {
    return -std::log(uniform01_open_low(g));
}

/// Pareto with P(X > x) = c / x^alpha for x >= c^(1/alpha).
inline double pareto(Engine& g, double alpha, double c = 1.0) {
    return std::pow(c / uniform01_open_low(g), 1.0 / alpha);
}

} // namespace amon
