#pragma once

#include <cstdint>
#include <random>

namespace uos {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; gives independent seeds for per-class / per-stream
// generators derived from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace uos
