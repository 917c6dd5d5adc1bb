#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace facetouch {

// std distributions differ between standard libraries, so everything seeded
// goes through these helpers on top of mt19937_64 to keep outputs portable.
using Rng = std::mt19937_64;

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) { return Rng(mix_seed(seed, stream)); }

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

inline int uniform_int(Rng& rng, int lo, int hi) { return lo + int(uniform_index(rng, std::uint64_t(hi - lo + 1))); }

// Box-Muller; one value per call.
double normal01(Rng& rng);

inline double normal(Rng& rng, double mean, double sd) { return mean + sd * normal01(rng); }

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

}  // namespace facetouch
