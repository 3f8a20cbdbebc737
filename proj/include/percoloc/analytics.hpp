#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace percoloc {

/// P(every cell ball holds a node) = (1 - e^{-n pi tau^2})^(2/r^2), evaluated
/// in log space so huge exponents neither underflow nor lose the tail.
inline double prob_all_cells_occupied(double n, double r, double tau) {
  if (!(n > 0.0)) throw std::invalid_argument("prob_all_cells_occupied: n must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("prob_all_cells_occupied: tau must be positive");
  if (!(r > 0.0) || !(r < std::numbers::sqrt2)) {
    throw std::invalid_argument("prob_all_cells_occupied: r must be in (0, sqrt(2))");
  }
  const double x = n * std::numbers::pi * tau * tau;
  const double cells = 2.0 / (r * r);
  const double base = -std::expm1(-x);  // 1 - e^{-x}, accurate near both ends
  if (base <= 0.0) return 0.0;
  return std::exp(cells * std::log(base));
}

/// P(a cell is red | it is occupied) for m anchors among intensity n, with
/// ball radius rho. Algebraically (1 - e^{-m pi rho^2}) / (1 - e^{-n pi rho^2});
/// hits the endpoints exactly: q(0) = 0, q(n) = 1.
inline double red_probability_q(double m, double n, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("red_probability_q: rho must be positive");
  if (m < 0.0 || m > n) throw std::invalid_argument("red_probability_q: need 0 <= m <= n");
  const double area = std::numbers::pi * rho * rho;
  const double denom = -std::expm1(-n * area);
  if (denom == 0.0) {
    throw std::invalid_argument("red_probability_q: n*pi*rho^2 underflows to zero");
  }
  return -std::expm1(-m * area) / denom;
}

/// Threshold c' / ln(sqrt(2)/r) that the red probability must exceed.
inline double red_threshold(double r, double c_prime) {
  if (c_prime < 0.0) throw std::invalid_argument("red_threshold: c_prime must be nonnegative");
  if (!(r > 0.0) || !(r < std::numbers::sqrt2)) {
    throw std::invalid_argument("red_threshold: r must be in (0, sqrt(2))");
  }
  return c_prime / std::log(std::numbers::sqrt2 / r);
}

/// Connectivity-scale radius sqrt(c ln(n) / n).
inline double connectivity_radius(double n, double c_radius) {
  if (!(n > 1.0)) throw std::invalid_argument("connectivity_radius: n must be > 1");
  if (!(c_radius > 0.0)) throw std::invalid_argument("connectivity_radius: c_radius must be positive");
  return std::sqrt(c_radius * std::log(n) / n);
}

struct SufficientAnchors {
  std::uint64_t m{};
  double threshold{};
  double q_at_m{};
};

/// Smallest integer m with q(m) > threshold, via closed-form inversion and a
/// bracketing verification at m and m-1. Throws if the threshold is >= 1
/// (no anchor count can reach it).
inline SufficientAnchors sufficient_anchors_detail(double n, double r, double c_prime, double rho) {
  const double threshold = red_threshold(r, c_prime);
  if (threshold >= 1.0) {
    throw std::domain_error("sufficient_anchors: infeasible, threshold unreachable (>= 1)");
  }
  const double area = std::numbers::pi * rho * rho;
  const double cap = std::ceil(n);
  // 1 - T * (1 - e^{-n area}); positive whenever T < 1
  const double arg = 1.0 + threshold * std::expm1(-n * area);
  if (!(arg > 0.0)) {
    throw std::domain_error("sufficient_anchors: infeasible, inversion argument not positive");
  }
  double m = std::ceil(-std::log(arg) / area);
  if (m < 0.0) m = 0.0;
  if (m > cap) m = cap;
  // the ceil can land a step off the strict inequality; correct by evaluation
  while (m > 0.0 && red_probability_q(m - 1.0, n, rho) > threshold) m -= 1.0;
  while (m < cap && !(red_probability_q(m, n, rho) > threshold)) m += 1.0;
  return SufficientAnchors{static_cast<std::uint64_t>(m), threshold,
                           red_probability_q(std::min(m, n), n, rho)};
}

inline std::uint64_t sufficient_anchors(double n, double r, double c_prime, double rho) {
  return sufficient_anchors_detail(n, r, c_prime, rho).m;
}

// --- scaling study -----------------------------------------------------------

enum class RhoMode { paper_r, tau };

struct ScalingRow {
  double n{};
  double c_radius{};
  double r{};
  double threshold{};
  double q_at_m{};
  std::uint64_t m_sufficient{};
  bool feasible{};
};

struct ScalingTable {
  std::vector<ScalingRow> rows;
  // least-squares slope of log m vs log n over the feasible rows per c_radius
  std::vector<std::pair<double, std::optional<double>>> slopes;
};

/// Two-pass least-squares slope of y against x. Needs >= 2 points.
inline std::optional<double> least_squares_slope(const std::vector<double>& x,
                                                 const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= static_cast<double>(x.size());
  ym /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - xm) * (y[i] - ym);
    sxx += (x[i] - xm) * (x[i] - xm);
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

/// Sufficient-anchor table across (n, c_radius) with the fitted log-log slope
/// per c_radius. Infeasible combinations are flagged, not dropped.
inline ScalingTable scaling_table(const std::vector<double>& n_values,
                                  const std::vector<double>& c_radius_values, double c_prime,
                                  RhoMode rho_mode) {
  ScalingTable table;
  for (double c_radius : c_radius_values) {
    std::vector<double> log_n, log_m;
    for (double n : n_values) {
      ScalingRow row;
      row.n = n;
      row.c_radius = c_radius;
      row.r = connectivity_radius(n, c_radius);
      const double rho = rho_mode == RhoMode::paper_r ? row.r : 0.9 * row.r / (2.0 * std::numbers::sqrt2);
      try {
        auto suff = sufficient_anchors_detail(n, row.r, c_prime, rho);
        row.threshold = suff.threshold;
        row.q_at_m = suff.q_at_m;
        row.m_sufficient = suff.m;
        row.feasible = true;
        if (suff.m >= 1) {
          log_n.push_back(std::log(n));
          log_m.push_back(std::log(static_cast<double>(suff.m)));
        }
      } catch (const std::domain_error&) {
        row.threshold = red_threshold(row.r, c_prime);
        row.feasible = false;
      }
      table.rows.push_back(row);
    }
    table.slopes.emplace_back(c_radius, least_squares_slope(log_n, log_m));
  }
  return table;
}

}  // namespace percoloc
