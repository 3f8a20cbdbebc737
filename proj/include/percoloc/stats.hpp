#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace percoloc {

struct Interval {
  double low{};
  double high{};
};

/// Wilson score interval for a binomial proportion, clipped to [0, 1].
/// The degenerate counts return exact endpoints (0 successes -> low = 0,
/// all successes -> high = 1) rather than a rounding residue.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.96) {
  if (trials == 0) throw std::invalid_argument("wilson_interval: trials must be >= 1");
  if (successes > trials) throw std::invalid_argument("wilson_interval: successes > trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  Interval iv{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (successes == 0) iv.low = 0.0;
  if (successes == trials) iv.high = 1.0;
  return iv;
}

}  // namespace percoloc
