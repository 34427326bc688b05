#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace uhisr {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream); the same pair always yields the
/// same sequence regardless of how many other streams exist.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x5ee0u};
    return Rng(seq);
}

/// FNV-1a, used to derive per-component seeds from names.
inline std::uint64_t hash_name(std::string_view name) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view component) {
    Rng r = make_stream(seed, hash_name(component));
    return r();
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double normal01(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace uhisr
