#pragma once

// Portable randomness. std::shuffle and the std distributions are
// implementation-defined, so plans and splits would differ between standard
// libraries; everything here is pinned to mt19937_64 and explicit algorithms.

#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace lmofs {

using Seed = std::uint64_t;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Purpose tags for derived seeds.
enum class SeedStream : std::uint64_t {
    removal_order = 1,
    run_split = 2,
    sweep_split = 3,
};

/// seed = splitmix64(splitmix64(master ^ splitmix64(stream)) + index).
/// Stable across platforms and compilers; changing it invalidates recorded plans.
inline Seed derive_seed(Seed master, SeedStream stream, std::uint64_t index) {
    const std::uint64_t s = splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(stream)));
    return splitmix64(s + index);
}

using Rng = std::mt19937_64;

/// Unbiased draw from [0, bound) by rejection.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t x = rng();
        if (x >= threshold) return x % bound;
    }
}

/// Fisher-Yates, drawing from the back.
template <typename T>
void shuffle(std::span<T> values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(values[i - 1], values[j]);
    }
}

/// First `k` entries of a uniform random permutation of 0..n-1 (partial Fisher-Yates).
inline std::vector<std::size_t> permutation_prefix(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < k && i < n; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
        std::swap(perm[i], perm[j]);
    }
    perm.resize(k < n ? k : n);
    return perm;
}

} // namespace lmofs
