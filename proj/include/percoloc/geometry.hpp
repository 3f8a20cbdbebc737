#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "percoloc/rng.hpp"

namespace percoloc {

/// A location on the unit square, both coordinates in [0, 1).
struct Point {
  double x{};
  double y{};
};

/// Distance convention. `torus` wraps each coordinate difference (the default
/// everywhere, so the square has no edge effects); `bounded` is plain Euclidean.
enum class Metric { torus, bounded };

/// Nodes sampled on the unit square, kept together with the parameters that
/// produced them so any realization can be replayed.
struct NodeSet {
  std::vector<Point> points;
  double density{};      // Poisson intensity; realized count fluctuates around it
  std::uint64_t seed{};

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

inline double squared_distance(const Point& a, const Point& b, Metric metric) {
  double dx = std::fabs(a.x - b.x);
  double dy = std::fabs(a.y - b.y);
  if (metric == Metric::torus) {
    if (dx > 0.5) dx = 1.0 - dx;
    if (dy > 0.5) dy = 1.0 - dy;
  }
  return dx * dx + dy * dy;
}

inline double distance(const Point& a, const Point& b, Metric metric) {
  return std::sqrt(squared_distance(a, b, metric));
}

/// Poisson point process: draws the count K ~ Poisson(density) first, then K
/// i.i.d. uniform points. Deterministic per (density, seed).
inline NodeSet sample_nodes(double density, std::uint64_t seed) {
  if (!(density > 0.0) || !std::isfinite(density)) {
    throw std::invalid_argument("sample_nodes: density must be positive and finite");
  }
  SplitMix64 rng(seed);
  const std::uint64_t count = sample_poisson(rng, density);
  NodeSet out;
  out.density = density;
  out.seed = seed;
  out.points.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    double x = rng.uniform01();
    double y = rng.uniform01();
    out.points.push_back(Point{x, y});
  }
  return out;
}

/// Uniform m-subset of the node indices (partial Fisher-Yates), returned sorted.
inline std::vector<std::uint32_t> sample_anchors(const NodeSet& nodes, std::uint32_t m,
                                                 std::uint64_t seed) {
  const std::size_t n = nodes.size();
  if (m > n) throw std::invalid_argument("sample_anchors: m exceeds node count");
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  SplitMix64 rng(seed);
  for (std::uint32_t i = 0; i < m; ++i) {
    std::uint64_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Number of nodes (excluding `exclude`) within `radius` of `center`.
/// Membership is distance <= radius, evaluated in squared form; ties have
/// probability zero under continuous placement.
inline std::size_t ball_count(const NodeSet& nodes, const Point& center, double radius,
                              Metric metric, const std::vector<std::uint32_t>* exclude = nullptr) {
  if (radius < 0.0) throw std::invalid_argument("ball_count: radius must be nonnegative");
  const double r2 = radius * radius;
  std::size_t count = 0;
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    if (exclude && std::find(exclude->begin(), exclude->end(), i) != exclude->end()) continue;
    if (squared_distance(nodes.points[i], center, metric) <= r2) ++count;
  }
  return count;
}

// Uniform bucket grid for fixed-radius neighbor queries. Bucket side is kept
// >= the build radius, so any query with radius <= that side only has to scan
// the 3x3 bucket neighborhood. Uses the same squared-distance predicate as
// ball_count, so the two agree exactly.
class BucketGrid {
 public:
  BucketGrid(const NodeSet& nodes, double max_query_radius, Metric metric)
      : nodes_(&nodes), metric_(metric), max_radius_(max_query_radius) {
    if (!(max_query_radius > 0.0)) {
      throw std::invalid_argument("BucketGrid: max_query_radius must be positive");
    }
    double b = std::floor(1.0 / max_query_radius);
    b_ = static_cast<int>(std::clamp(b, 1.0, 1024.0));
    buckets_.assign(static_cast<std::size_t>(b_) * b_, {});
    for (std::uint32_t i = 0; i < nodes.size(); ++i) {
      buckets_[bucket_of(nodes.points[i])].push_back(i);
    }
  }

  template <class Pred>
  std::size_t count_within(const Point& center, double radius, Pred&& keep) const {
    std::size_t count = 0;
    visit_candidates(center, radius, [&](std::uint32_t i, const Point& p, double r2) {
      if (keep(i) && squared_distance(p, center, metric_) <= r2) ++count;
    });
    return count;
  }

  std::size_t count_within(const Point& center, double radius) const {
    return count_within(center, radius, [](std::uint32_t) { return true; });
  }

  template <class Pred>
  void collect_within(const Point& center, double radius, Pred&& keep,
                      std::vector<std::uint32_t>& out) const {
    out.clear();
    visit_candidates(center, radius, [&](std::uint32_t i, const Point& p, double r2) {
      if (keep(i) && squared_distance(p, center, metric_) <= r2) out.push_back(i);
    });
  }

  int buckets_per_side() const { return b_; }

 private:
  std::size_t bucket_of(const Point& p) const {
    int bx = std::min(b_ - 1, static_cast<int>(p.x * b_));
    int by = std::min(b_ - 1, static_cast<int>(p.y * b_));
    bx = std::max(0, bx);
    by = std::max(0, by);
    return static_cast<std::size_t>(by) * b_ + bx;
  }

  template <class Visit>
  void visit_candidates(const Point& center, double radius, Visit&& visit) const {
    if (radius < 0.0) throw std::invalid_argument("BucketGrid: radius must be nonnegative");
    const double r2 = radius * radius;
    const double side = 1.0 / b_;
    if (b_ < 3 || radius > side) {
      // 3x3 neighborhood would not cover the ball (or would alias under wrap):
      // fall back to the full scan, which is always exact.
      for (std::uint32_t i = 0; i < nodes_->size(); ++i) {
        visit(i, nodes_->points[i], r2);
      }
      return;
    }
    int bx = std::min(b_ - 1, std::max(0, static_cast<int>(center.x * b_)));
    int by = std::min(b_ - 1, std::max(0, static_cast<int>(center.y * b_)));
    for (int dy = -1; dy <= 1; ++dy) {
      int ny = by + dy;
      if (metric_ == Metric::torus) {
        ny = (ny + b_) % b_;
      } else if (ny < 0 || ny >= b_) {
        continue;
      }
      for (int dx = -1; dx <= 1; ++dx) {
        int nx = bx + dx;
        if (metric_ == Metric::torus) {
          nx = (nx + b_) % b_;
        } else if (nx < 0 || nx >= b_) {
          continue;
        }
        for (std::uint32_t i : buckets_[static_cast<std::size_t>(ny) * b_ + nx]) {
          visit(i, nodes_->points[i], r2);
        }
      }
    }
  }

  const NodeSet* nodes_;
  Metric metric_;
  double max_radius_;
  int b_;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

}  // namespace percoloc
