#pragma once

#include <cstdint>
#include <random>

namespace dmis {

// The standard distributions are implementation-defined, so uniform draws are
// built directly from the 64-bit engine output to keep runs reproducible
// across standard libraries.
using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent engine for a named sub-stream of a run seed.
inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
  return Engine(splitmix64(seed ^ splitmix64(stream + 0x51ed2701ULL)));
}

/// Uniform double in [0, 1).
inline double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n) by rejection (unbiased).
inline std::uint64_t uniform_index(Engine& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return r % n;
}

}  // namespace dmis
