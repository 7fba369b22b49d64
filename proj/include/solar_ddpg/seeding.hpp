#pragma once

#include <cstdint>

namespace solar_ddpg {

/// Derives an independent stream seed from a root seed: one SplitMix64 step
/// over root + (stream + 1) * golden-ratio increment. Used everywhere a
/// component or trial needs its own RNG, so results never depend on the
/// order in which trials are scheduled.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    std::uint64_t z = root + (stream + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace solar_ddpg
