#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "percoloc/exec.hpp"
#include "percoloc/geometry.hpp"
#include "percoloc/rng.hpp"
#include "percoloc/stats.hpp"

namespace percoloc {

// The update rule only counts localized nodes in range; whether a triple must
// also span a non-degenerate triangle is left to this policy. Degenerate
// triples have probability zero under continuous placement, so `ignore` is
// the default; `epsilon` rejects triples whose triangle area is < eps * r^2.
struct CollinearityPolicy {
  enum class Mode { ignore, epsilon };
  Mode mode{Mode::ignore};
  double epsilon{1e-6};

  static CollinearityPolicy Ignore() { return {}; }
  static CollinearityPolicy Epsilon(double eps = 1e-6) {
    return CollinearityPolicy{Mode::epsilon, eps};
  }
};

/// Which nodes are localized, how many synchronous rounds have run, and the
/// per-round sets of newly localized indices.
struct AnchorState {
  std::vector<std::uint8_t> localized;
  std::uint32_t round{0};
  std::vector<std::vector<std::uint32_t>> newly_localized_history;

  static AnchorState initial(std::size_t node_count, const std::vector<std::uint32_t>& anchors) {
    AnchorState st;
    st.localized.assign(node_count, 0);
    for (std::uint32_t a : anchors) {
      if (a >= node_count) throw std::invalid_argument("AnchorState: anchor index out of range");
      st.localized[a] = 1;
    }
    return st;
  }

  std::size_t localized_count() const {
    std::size_t n = 0;
    for (auto v : localized) n += v;
    return n;
  }
};

struct LocalizationResult {
  std::size_t final_localized_count{};
  std::uint32_t rounds_to_fixpoint{};  // scans executed, including the final empty one
  bool fully_localized{};
  std::optional<AnchorState> trace;
};

namespace detail {

// Unwrapped displacement of b relative to a (torus picks the nearest image).
inline Point relative(const Point& a, const Point& b, Metric metric) {
  double dx = b.x - a.x;
  double dy = b.y - a.y;
  if (metric == Metric::torus) {
    if (dx > 0.5) dx -= 1.0;
    if (dx < -0.5) dx += 1.0;
    if (dy > 0.5) dy -= 1.0;
    if (dy < -0.5) dy += 1.0;
  }
  return Point{dx, dy};
}

inline bool has_spanning_triple(const std::vector<Point>& rel, double min_area) {
  const std::size_t k = rel.size();
  for (std::size_t i = 0; i + 2 < k; ++i) {
    for (std::size_t j = i + 1; j + 1 < k; ++j) {
      const double ux = rel[j].x - rel[i].x, uy = rel[j].y - rel[i].y;
      for (std::size_t l = j + 1; l < k; ++l) {
        const double vx = rel[l].x - rel[i].x, vy = rel[l].y - rel[i].y;
        if (0.5 * std::fabs(ux * vy - uy * vx) >= min_area) return true;
      }
    }
  }
  return false;
}

// Builds U_t against the pre-step localized set (synchronous semantics).
inline std::vector<std::uint32_t> eligible_nodes(const NodeSet& nodes, const BucketGrid& index,
                                                 const AnchorState& state, double r, Metric metric,
                                                 const CollinearityPolicy& policy) {
  std::vector<std::uint32_t> added;
  std::vector<std::uint32_t> hits;
  std::vector<Point> rel;
  auto loc = [&](std::uint32_t i) { return state.localized[i] != 0; };
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    if (state.localized[i]) continue;
    if (policy.mode == CollinearityPolicy::Mode::ignore) {
      if (index.count_within(nodes.points[i], r, loc) >= 3) added.push_back(i);
    } else {
      index.collect_within(nodes.points[i], r, loc, hits);
      if (hits.size() < 3) continue;
      rel.clear();
      for (std::uint32_t h : hits) rel.push_back(relative(nodes.points[i], nodes.points[h], metric));
      if (has_spanning_triple(rel, policy.epsilon * r * r)) added.push_back(i);
    }
  }
  return added;
}

inline void apply_round(AnchorState& state, std::vector<std::uint32_t> added) {
  for (std::uint32_t i : added) state.localized[i] = 1;
  state.round += 1;
  state.newly_localized_history.push_back(std::move(added));
}

}  // namespace detail

/// One synchronous round: every unlocalized node with >= 3 localized nodes in
/// radio range (passing the collinearity policy) becomes localized.
inline AnchorState localize_step(const NodeSet& nodes, const AnchorState& state, double r,
                                 Metric metric = Metric::torus,
                                 const CollinearityPolicy& policy = CollinearityPolicy::Ignore()) {
  if (!(r > 0.0)) throw std::invalid_argument("localize_step: radio range must be positive");
  if (state.localized.size() != nodes.size()) {
    throw std::invalid_argument("localize_step: state does not match node set");
  }
  AnchorState next = state;
  if (!nodes.empty()) {
    BucketGrid index(nodes, r, metric);
    detail::apply_round(next, detail::eligible_nodes(nodes, index, state, r, metric, policy));
  } else {
    detail::apply_round(next, {});
  }
  return next;
}

/// Iterates rounds until no new node localizes (or max_rounds scans ran).
inline LocalizationResult run_localization(const NodeSet& nodes,
                                           const std::vector<std::uint32_t>& anchors, double r,
                                           Metric metric = Metric::torus,
                                           const CollinearityPolicy& policy = CollinearityPolicy::Ignore(),
                                           std::optional<std::uint32_t> max_rounds = std::nullopt,
                                           bool want_trace = false) {
  if (!(r > 0.0)) throw std::invalid_argument("run_localization: radio range must be positive");
  AnchorState state = AnchorState::initial(nodes.size(), anchors);
  if (!nodes.empty()) {
    BucketGrid index(nodes, r, metric);
    for (;;) {
      if (max_rounds && state.round >= *max_rounds) break;
      auto added = detail::eligible_nodes(nodes, index, state, r, metric, policy);
      const bool done = added.empty();
      detail::apply_round(state, std::move(added));
      if (done) break;
    }
  }
  LocalizationResult res;
  res.final_localized_count = state.localized_count();
  res.rounds_to_fixpoint = state.round;
  res.fully_localized = res.final_localized_count == nodes.size();
  if (want_trace) res.trace = std::move(state);
  return res;
}

// --- empirical minimum anchor count ----------------------------------------

struct ProbeStat {
  std::uint32_t m{};
  std::uint64_t successes{};
  std::uint64_t trials{};
  double wilson_low{};
  double wilson_high{};
};

struct MinAnchorsEstimate {
  bool achievable{};
  std::uint32_t m_hat{};        // smallest probed m whose Wilson lower bound met the target
  std::uint32_t bracket_low{};  // largest probed m below m_hat that failed
  std::vector<ProbeStat> probes;
};

struct MinAnchorsOptions {
  Metric metric{Metric::torus};
  CollinearityPolicy policy{};
  unsigned workers{1};
  double z{1.96};
  std::uint32_t max_resamples{1000};
};

namespace detail {

struct TrialDraw {
  NodeSet nodes;
  std::vector<std::uint32_t> anchors;
  std::uint32_t resamples{};
};

// (nodes, anchors) realization for a trial; resamples with an advanced seed
// until the realized count can host m anchors, and reports how often.
inline TrialDraw draw_realization(double density, std::uint32_t m, std::uint64_t trial_seed,
                                  std::uint32_t max_resamples) {
  for (std::uint32_t attempt = 0;; ++attempt) {
    if (attempt > max_resamples) {
      throw std::runtime_error("draw_realization: resample budget exhausted (m far above density?)");
    }
    const std::uint64_t s = split_seed(trial_seed, attempt);
    NodeSet nodes = sample_nodes(density, split_seed(s, 0));
    if (nodes.size() < m) continue;
    auto anchors = sample_anchors(nodes, m, split_seed(s, 1));
    return TrialDraw{std::move(nodes), std::move(anchors), attempt};
  }
}

}  // namespace detail

/// Estimates the minimum anchor count whose full-localization frequency meets
/// `success_target`, by bisection over m. Valid because success probability is
/// monotone in the anchor set. The returned m is the smallest probed value
/// whose Wilson lower bound reached the target.
inline MinAnchorsEstimate min_anchors_empirical(double density, double r, std::uint64_t trials,
                                                double success_target, std::uint64_t seed,
                                                const MinAnchorsOptions& opts = {}) {
  if (trials < 1) throw std::invalid_argument("min_anchors_empirical: trials must be >= 1");
  if (!(success_target > 0.0) || !(success_target < 1.0)) {
    throw std::invalid_argument("min_anchors_empirical: success_target must be in (0, 1)");
  }
  if (!(density > 0.0) || density > 1e8) {
    throw std::invalid_argument("min_anchors_empirical: density must be in (0, 1e8]");
  }
  if (!(r > 0.0)) throw std::invalid_argument("min_anchors_empirical: radio range must be positive");

  MinAnchorsEstimate est;
  auto probe = [&](std::uint32_t m) -> bool {
    std::vector<std::uint8_t> ok(trials, 0);
    parallel_for(trials, opts.workers, [&](std::uint64_t t) {
      auto draw = detail::draw_realization(density, m, split_seed(seed, m, t), opts.max_resamples);
      ok[t] = run_localization(draw.nodes, draw.anchors, r, opts.metric, opts.policy).fully_localized
                  ? 1
                  : 0;
    });
    std::uint64_t successes = 0;
    for (auto v : ok) successes += v;
    const Interval iv = wilson_interval(successes, trials, opts.z);
    est.probes.push_back(ProbeStat{m, successes, trials, iv.low, iv.high});
    return iv.low >= success_target;
  };

  const std::uint32_t hi_cap = static_cast<std::uint32_t>(std::ceil(density));
  if (!probe(hi_cap)) {
    // even making (essentially) every node an anchor missed the target
    est.achievable = false;
    est.m_hat = hi_cap;
    est.bracket_low = hi_cap;
    return est;
  }
  if (probe(0)) {
    est.achievable = true;
    est.m_hat = 0;
    est.bracket_low = 0;
    return est;
  }
  std::uint32_t lo = 0, hi = hi_cap;
  while (hi - lo > 1) {
    const std::uint32_t mid = lo + (hi - lo) / 2;
    if (probe(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  est.achievable = true;
  est.m_hat = hi;
  est.bracket_low = lo;
  std::sort(est.probes.begin(), est.probes.end(),
            [](const ProbeStat& a, const ProbeStat& b) { return a.m < b.m; });
  return est;
}

}  // namespace percoloc
