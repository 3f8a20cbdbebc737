#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace percoloc {

// SplitMix64 generator. Used instead of <random> engines+distributions
// because the standard distribution algorithms are implementation-defined
// and every seeded run here must replay bit-for-bit.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), rejection-sampled so there is no modulo bias.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("below: bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

// Counter-based seed derivation. (stream+1)*odd-constant is injective mod 2^64
// and the finalizer is a bijection, so distinct streams of one base seed can
// never collide. Order-independent by construction: trial i gets the same seed
// no matter which worker claims it.
inline std::uint64_t split_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t split_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return split_seed(split_seed(base, a), b);
}

/// Exact Poisson(mean) draw: counts unit-exponential arrivals until the budget
/// is spent. O(mean) uniforms per draw, which is fine at the densities used here.
inline std::uint64_t sample_poisson(SplitMix64& rng, double mean) {
  if (mean < 0.0 || !std::isfinite(mean)) {
    throw std::invalid_argument("sample_poisson: mean must be finite and nonnegative");
  }
  std::uint64_t k = 0;
  double t = -std::log1p(-rng.uniform01());
  while (t <= mean) {
    ++k;
    t += -std::log1p(-rng.uniform01());
  }
  return k;
}

}  // namespace percoloc
