#pragma once

#include <cstdint>
#include <random>

namespace btlab {

using Rng = std::mt19937_64;

// Generator for a (seed, stream) pair: the engine is seeded with
// splitmix64(seed ^ splitmix64(stream)), so streams are independent of the
// order in which they are created.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace btlab
