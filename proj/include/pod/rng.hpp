#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pod {

using Rng = std::mt19937_64;

/// Counter-based seed derivation: mixes the global seed, a stream label and an index
/// through splitmix64 so that each (stream, index) pair gets an independent seed.
/// Adding a new stream never changes the seeds of existing ones.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stream, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t global_seed, std::string_view stream, std::uint64_t index = 0)
{
    return Rng{derive_seed(global_seed, stream, index)};
}

/// Uniform real in [0, 1).
inline double uniform01(Rng& rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Uniform integer in the closed range [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

} // namespace pod
