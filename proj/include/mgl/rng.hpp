#pragma once

#include <cstdint>
#include <random>

namespace mgl {

// Independent streams per purpose: the same user seed must not produce
// correlated draws in, say, data generation and state initialization.
enum class Stream : std::uint64_t {
    ThreeMoons = 1,
    SwissRoll,
    Subsample,
    Fidelity,
    InitState,
    KMeans,
    Lanczos,
};

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t sub = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(sub),
                      static_cast<std::uint32_t>(sub >> 32)};
    return std::mt19937_64(seq);
}

} // namespace mgl
