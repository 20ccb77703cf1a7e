#pragma once

#include <cstdint>
#include <random>

namespace maskexplain {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t& state);

/// Independent child seed for stream `stream` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace maskexplain
