#pragma once

#include <cstdint>
#include <random>

namespace ssondo {

using Rng = std::mt19937_64;

// Uniform double in the open interval (0, 1), built from 53 raw bits so the
// stream is identical across standard library implementations.
inline double uniform01(Rng& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

/// Derives an independent stream seed from a base seed and a tag (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace ssondo
