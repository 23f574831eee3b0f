#pragma once

#include <cstdint>
#include <random>
#include <vector>

// Seeded randomness helpers. Everything that consumes randomness in this
// library goes through these so that a run is a pure function of its seed.
// std::uniform_real_distribution and std::shuffle are implementation-defined;
// we avoid them for anything that ends up in a saved artifact.

namespace valta {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform draw strictly inside (0, 1), suitable as Concrete noise.
inline double uniform_open01(Rng& rng) {
  double u = uniform01(rng);
  return u > 0.0 ? u : 0x1.0p-53;
}

// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Fisher-Yates; deterministic across standard libraries, unlike std::shuffle.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

// Derive an independent stream from a master seed. splitmix64 scrambling so
// that nearby seeds and stream ids do not produce correlated generators.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return Rng(x);
}

}  // namespace valta
