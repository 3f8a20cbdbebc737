#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "percoloc/exec.hpp"
#include "percoloc/rng.hpp"
#include "percoloc/stats.hpp"

namespace percoloc {

enum class Neighborhood { vn4, moore8 };
enum class Boundary { bounded, torus };

/// Activation rule: an inactive vertex turns active once `threshold` of its
/// neighbors are active, and stays active forever.
struct BootstrapRule {
  Neighborhood neighborhood{Neighborhood::vn4};
  int threshold{2};
  Boundary boundary{Boundary::bounded};
};

inline void validate(const BootstrapRule& rule) {
  // threshold above the actual degree (e.g. 5 on vn4) is allowed: the
  // dynamics are simply frozen, which some sweeps use as a degenerate case.
  if (rule.threshold < 1 || rule.threshold > 8) {
    throw std::invalid_argument("BootstrapRule: threshold must be in [1, 8]");
  }
}

// L x L activation lattice, one bit per vertex, packed row-major into 64-bit
// words so a step is a handful of shifts and carry-save adds per word.
class GridState {
 public:
  GridState(int side, BootstrapRule rule)
      : L_(side), words_(side > 0 ? (side + 63) / 64 : 0), rule_(rule) {
    if (side < 1) throw std::invalid_argument("GridState: side must be >= 1");
    validate(rule);
    bits_.assign(static_cast<std::size_t>(words_) * L_, 0);
  }

  int side() const { return L_; }
  int words_per_row() const { return words_; }
  const BootstrapRule& rule() const { return rule_; }

  bool active(int x, int y) const {
    check(x, y);
    return (row(y)[x >> 6] >> (x & 63)) & 1u;
  }

  void set_active(int x, int y, bool value = true) {
    check(x, y);
    std::uint64_t& w = row(y)[x >> 6];
    const std::uint64_t bit = 1ULL << (x & 63);
    if (value) {
      w |= bit;
    } else {
      w &= ~bit;
    }
  }

  std::size_t active_count() const {
    std::size_t n = 0;
    for (std::uint64_t w : bits_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  bool fully_active() const {
    return active_count() == static_cast<std::size_t>(L_) * L_;
  }

  GridState with_rule(BootstrapRule rule) const {
    GridState copy = *this;
    validate(rule);
    copy.rule_ = rule;
    return copy;
  }

  bool operator==(const GridState& other) const {
    return L_ == other.L_ && bits_ == other.bits_;
  }

  const std::uint64_t* row(int y) const { return bits_.data() + static_cast<std::size_t>(y) * words_; }
  std::uint64_t* row(int y) { return bits_.data() + static_cast<std::size_t>(y) * words_; }
  std::uint64_t last_word_mask() const {
    const int rem = L_ & 63;
    return rem == 0 ? ~0ULL : (1ULL << rem) - 1;
  }

 private:
  void check(int x, int y) const {
    if (x < 0 || y < 0 || x >= L_ || y >= L_) {
      throw std::out_of_range("GridState: vertex out of range");
    }
  }

  int L_;
  int words_;
  BootstrapRule rule_;
  std::vector<std::uint64_t> bits_;
};

namespace detail {

// dst bit x = src bit x-1 (west neighbor mask). Wrap pulls bit L-1 into bit 0.
inline void shift_row_up(const std::uint64_t* src, std::uint64_t* dst, int words, int side,
                         std::uint64_t last_mask, bool wrap) {
  for (int w = words - 1; w > 0; --w) {
    dst[w] = (src[w] << 1) | (src[w - 1] >> 63);
  }
  dst[0] = src[0] << 1;
  if (wrap) {
    const std::uint64_t hi = (src[(side - 1) >> 6] >> ((side - 1) & 63)) & 1u;
    dst[0] |= hi;
  }
  dst[words - 1] &= last_mask;
}

// dst bit x = src bit x+1 (east neighbor mask). Wrap pulls bit 0 into bit L-1.
inline void shift_row_down(const std::uint64_t* src, std::uint64_t* dst, int words, int side,
                           bool wrap) {
  for (int w = 0; w + 1 < words; ++w) {
    dst[w] = (src[w] >> 1) | (src[w + 1] << 63);
  }
  dst[words - 1] = src[words - 1] >> 1;
  if (wrap) {
    dst[(side - 1) >> 6] |= (src[0] & 1u) << ((side - 1) & 63);
  }
}

struct StepBuffers {
  std::vector<std::uint64_t> shifted_west;  // per-row west-neighbor planes
  std::vector<std::uint64_t> shifted_east;
  std::vector<std::uint64_t> zero_row;
  std::vector<std::uint64_t> next;
};

// One synchronous update: every inactive vertex with >= threshold active
// neighbors activates. Neighbor counts are accumulated bit-parallel with
// carry-save adders (4-bit counters per lane; the maximum count is 8).
inline bool step_into(const GridState& src, StepBuffers& buf, std::vector<std::uint64_t>& out) {
  const int L = src.side();
  const int W = src.words_per_row();
  const bool wrap = src.rule().boundary == Boundary::torus;
  const bool moore = src.rule().neighborhood == Neighborhood::moore8;
  const std::uint64_t last_mask = src.last_word_mask();

  buf.shifted_west.resize(static_cast<std::size_t>(W) * L);
  buf.shifted_east.resize(static_cast<std::size_t>(W) * L);
  buf.zero_row.assign(W, 0);
  out.resize(static_cast<std::size_t>(W) * L);

  for (int y = 0; y < L; ++y) {
    shift_row_up(src.row(y), buf.shifted_west.data() + static_cast<std::size_t>(y) * W, W, L,
                 last_mask, wrap);
    shift_row_down(src.row(y), buf.shifted_east.data() + static_cast<std::size_t>(y) * W, W, L,
                   wrap);
  }

  const int theta = src.rule().threshold;
  const std::uint64_t t0 = (theta & 1) ? ~0ULL : 0;
  const std::uint64_t t1 = (theta & 2) ? ~0ULL : 0;
  const std::uint64_t t2 = (theta & 4) ? ~0ULL : 0;
  const std::uint64_t t3 = (theta & 8) ? ~0ULL : 0;

  bool changed = false;
  for (int y = 0; y < L; ++y) {
    const std::uint64_t* cur = src.row(y);
    const std::uint64_t* up;
    const std::uint64_t* up_w;
    const std::uint64_t* up_e;
    const std::uint64_t* dn;
    const std::uint64_t* dn_w;
    const std::uint64_t* dn_e;
    if (y > 0 || wrap) {
      const int yy = y > 0 ? y - 1 : L - 1;
      up = src.row(yy);
      up_w = buf.shifted_west.data() + static_cast<std::size_t>(yy) * W;
      up_e = buf.shifted_east.data() + static_cast<std::size_t>(yy) * W;
    } else {
      up = up_w = up_e = buf.zero_row.data();
    }
    if (y + 1 < L || wrap) {
      const int yy = y + 1 < L ? y + 1 : 0;
      dn = src.row(yy);
      dn_w = buf.shifted_west.data() + static_cast<std::size_t>(yy) * W;
      dn_e = buf.shifted_east.data() + static_cast<std::size_t>(yy) * W;
    } else {
      dn = dn_w = dn_e = buf.zero_row.data();
    }
    const std::uint64_t* cur_w = buf.shifted_west.data() + static_cast<std::size_t>(y) * W;
    const std::uint64_t* cur_e = buf.shifted_east.data() + static_cast<std::size_t>(y) * W;

    std::uint64_t* dst = out.data() + static_cast<std::size_t>(y) * W;
    for (int w = 0; w < W; ++w) {
      std::uint64_t s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      auto add = [&](std::uint64_t b) {
        std::uint64_t c0 = s0 & b;
        s0 ^= b;
        std::uint64_t c1 = s1 & c0;
        s1 ^= c0;
        std::uint64_t c2 = s2 & c1;
        s2 ^= c1;
        s3 ^= c2;
      };
      add(up[w]);
      add(dn[w]);
      add(cur_w[w]);
      add(cur_e[w]);
      if (moore) {
        add(up_w[w]);
        add(up_e[w]);
        add(dn_w[w]);
        add(dn_e[w]);
      }
      // 4-bit "count >= theta" comparator, evaluated lane-wise.
      const std::uint64_t ge0 = s0 | ~t0;
      const std::uint64_t ge1 = (s1 & ~t1) | (~(s1 ^ t1) & ge0);
      const std::uint64_t ge2 = (s2 & ~t2) | (~(s2 ^ t2) & ge1);
      const std::uint64_t ge = (s3 & ~t3) | (~(s3 ^ t3) & ge2);
      std::uint64_t next = cur[w] | ge;
      if (w == W - 1) next &= last_mask;
      if (next != cur[w]) changed = true;
      dst[w] = next;
    }
  }
  return changed;
}

inline std::vector<std::uint64_t>& grid_bits(GridState& g);

}  // namespace detail

/// One synchronous bootstrap step; active vertices persist.
inline GridState bootstrap_step(const GridState& state) {
  detail::StepBuffers buf;
  std::vector<std::uint64_t> next;
  detail::step_into(state, buf, next);
  GridState out = state;
  for (int y = 0; y < state.side(); ++y) {
    std::uint64_t* dst = out.row(y);
    const std::uint64_t* srcw = next.data() + static_cast<std::size_t>(y) * state.words_per_row();
    for (int w = 0; w < state.words_per_row(); ++w) dst[w] = srcw[w];
  }
  return out;
}

struct BootstrapRunResult {
  GridState final_state;
  std::size_t steps{};  // growth steps: updates that activated at least one vertex
  bool fully_active{};
};

/// Iterates to the fixpoint (or max_steps growth steps). The step count is
/// bounded by L^2 since every counted step activates a new vertex.
inline BootstrapRunResult run_bootstrap(const GridState& initial,
                                        std::optional<std::size_t> max_steps = std::nullopt) {
  GridState cur = initial;
  detail::StepBuffers buf;
  std::vector<std::uint64_t> next;
  std::size_t steps = 0;
  for (;;) {
    if (max_steps && steps >= *max_steps) break;
    const bool changed = detail::step_into(cur, buf, next);
    if (!changed) break;
    for (int y = 0; y < cur.side(); ++y) {
      std::uint64_t* dst = cur.row(y);
      const std::uint64_t* srcw = next.data() + static_cast<std::size_t>(y) * cur.words_per_row();
      for (int w = 0; w < cur.words_per_row(); ++w) dst[w] = srcw[w];
    }
    ++steps;
  }
  const bool full = cur.fully_active();
  return BootstrapRunResult{std::move(cur), steps, full};
}

/// i.i.d. Bernoulli(p) initial activation, deterministic per seed.
inline GridState random_initial(int side, double p, std::uint64_t seed, BootstrapRule rule) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("random_initial: p must be in [0, 1]");
  GridState g(side, rule);
  SplitMix64 rng(seed);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      if (rng.uniform01() < p) g.set_active(x, y);
    }
  }
  return g;
}

// --- concentric-square face condition ------------------------------------

/// Whether the corner vertices of a concentric square belong to its faces.
/// `exclude_corners` is the default: a single corner seed shared by two faces
/// can deadlock the 3-of-8 rule, so generated configurations avoid corners.
enum class FaceConvention { exclude_corners, include_corners };

namespace detail {

template <class PerFace>
void for_each_face(int side, int k, FaceConvention conv, PerFace&& per_face) {
  const int c = side / 2;
  if (k == 0) {
    std::vector<std::pair<int, int>> center{{c, c}};
    for (int f = 0; f < 4; ++f) per_face(center);
    return;
  }
  const int lo = c - k, hi = c + k;
  const int first = conv == FaceConvention::exclude_corners ? lo + 1 : lo;
  const int last = conv == FaceConvention::exclude_corners ? hi - 1 : hi;
  std::vector<std::pair<int, int>> face;
  face.reserve(static_cast<std::size_t>(last - first + 1));
  auto emit = [&](auto coord) {
    face.clear();
    for (int t = first; t <= last; ++t) face.push_back(coord(t));
    per_face(face);
  };
  emit([&](int t) { return std::pair<int, int>{t, lo}; });  // top row
  emit([&](int t) { return std::pair<int, int>{t, hi}; });  // bottom row
  emit([&](int t) { return std::pair<int, int>{lo, t}; });  // left column
  emit([&](int t) { return std::pair<int, int>{hi, t}; });  // right column
}

inline void require_odd(int side, const char* what) {
  if (side % 2 == 0) {
    throw std::invalid_argument(std::string(what) +
                                ": side must be odd (squares are centered on a vertex)");
  }
}

}  // namespace detail

/// True iff every concentric square S_{2k+1}, k = 0..(L-1)/2, has at least one
/// active vertex on each of its four faces. Odd side only.
inline bool face_condition_holds(const GridState& state,
                                 FaceConvention conv = FaceConvention::exclude_corners) {
  detail::require_odd(state.side(), "face_condition_holds");
  const int kmax = state.side() / 2;
  for (int k = 0; k <= kmax; ++k) {
    bool all_faces = true;
    detail::for_each_face(state.side(), k, conv, [&](const auto& face) {
      bool any = false;
      for (auto [x, y] : face) {
        if (state.active(x, y)) {
          any = true;
          break;
        }
      }
      if (!any) all_faces = false;
    });
    if (!all_faces) return false;
  }
  return true;
}

/// Random minimal-ish face-satisfying configuration: the center vertex plus
/// one uniformly chosen vertex per face of every concentric square. Satisfies
/// face_condition_holds by construction.
inline GridState sample_face_satisfying(int side, std::uint64_t seed,
                                        BootstrapRule rule = BootstrapRule{},
                                        FaceConvention conv = FaceConvention::exclude_corners) {
  detail::require_odd(side, "sample_face_satisfying");
  GridState g(side, rule);
  const int c = side / 2;
  g.set_active(c, c);
  SplitMix64 rng(seed);
  for (int k = 1; k <= side / 2; ++k) {
    detail::for_each_face(side, k, conv, [&](const auto& face) {
      auto [x, y] = face[rng.below(face.size())];
      g.set_active(x, y);
    });
  }
  return g;
}

// --- critical-probability estimation --------------------------------------

struct CurvePoint {
  double p{};
  std::uint64_t trials{};
  std::uint64_t successes{};
  double wilson_low{};
  double wilson_high{};
};

struct CriticalEstimate {
  double p_hat{};                 // smallest swept p whose success fraction >= 1/2
  std::vector<CurvePoint> curve;  // every swept point, ascending in p
};

/// Monte-Carlo estimate of the finite-size critical probability: coarse sweep
/// in steps of `resolution`, one refinement pass at resolution/10 around the
/// first crossing of success fraction 1/2.
inline CriticalEstimate estimate_critical_p(int side, BootstrapRule rule, std::uint64_t trials,
                                            double resolution, std::uint64_t seed,
                                            unsigned workers = 1) {
  if (trials < 1) throw std::invalid_argument("estimate_critical_p: trials must be >= 1");
  if (!(resolution > 0.0) || !(resolution < 1.0)) {
    throw std::invalid_argument("estimate_critical_p: resolution must be in (0, 1)");
  }
  validate(rule);

  const double fine = resolution / 10.0;
  auto sweep_point = [&](std::uint64_t fine_index) -> CurvePoint {
    double p = std::min(1.0, static_cast<double>(fine_index) * fine);
    std::vector<std::uint8_t> ok(trials, 0);
    parallel_for(trials, workers, [&](std::uint64_t t) {
      const std::uint64_t s = split_seed(seed, fine_index, t);
      GridState g = random_initial(side, p, s, rule);
      ok[t] = run_bootstrap(g).fully_active ? 1 : 0;
    });
    std::uint64_t successes = 0;
    for (auto v : ok) successes += v;
    const Interval iv = wilson_interval(successes, trials);
    return CurvePoint{p, trials, successes, iv.low, iv.high};
  };

  std::vector<CurvePoint> curve;
  std::uint64_t cross_index = 0;
  std::uint64_t prev_index = 0;
  bool crossed = false;
  const std::uint64_t max_index = static_cast<std::uint64_t>(std::ceil(10.0 / resolution));
  for (std::uint64_t i = 10; i <= max_index + 10; i += 10) {
    const std::uint64_t idx = std::min(i, max_index);
    CurvePoint pt = sweep_point(idx);
    curve.push_back(pt);
    if (2 * pt.successes >= pt.trials) {
      crossed = true;
      cross_index = idx;
      break;
    }
    prev_index = idx;
    if (pt.p >= 1.0) break;
  }
  if (crossed && cross_index > prev_index + 1) {
    for (std::uint64_t j = prev_index + 1; j < cross_index; ++j) {
      curve.push_back(sweep_point(j));
    }
  }
  std::sort(curve.begin(), curve.end(),
            [](const CurvePoint& a, const CurvePoint& b) { return a.p < b.p; });

  double p_hat = 1.0;
  for (const auto& pt : curve) {
    if (2 * pt.successes >= pt.trials) {
      p_hat = pt.p;
      break;
    }
  }
  return CriticalEstimate{p_hat, std::move(curve)};
}

/// Asymptotic sharp threshold pi^2 / (18 ln L); reference value only, the
/// finite-size crossing converges to it far too slowly to check numerically.
inline double holroyd_pc(double side) {
  if (side < 2.0) throw std::invalid_argument("holroyd_pc: side must be >= 2");
  return std::numbers::pi * std::numbers::pi / (18.0 * std::log(side));
}

// --- fixture text format ---------------------------------------------------

/// Serializes the activation lattice as lines of '0'/'1', row y per line.
inline std::string to_text(const GridState& state) {
  std::string out;
  out.reserve(static_cast<std::size_t>(state.side() + 1) * state.side());
  for (int y = 0; y < state.side(); ++y) {
    for (int x = 0; x < state.side(); ++x) out.push_back(state.active(x, y) ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

inline GridState grid_from_text(const std::string& text, BootstrapRule rule) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw std::invalid_argument("grid_from_text: no rows");
  const int side = static_cast<int>(rows.size());
  GridState g(side, rule);
  for (int y = 0; y < side; ++y) {
    if (static_cast<int>(rows[y].size()) != side) {
      throw std::invalid_argument("grid_from_text: grid must be square");
    }
    for (int x = 0; x < side; ++x) {
      const char c = rows[y][x];
      if (c == '1') {
        g.set_active(x, y);
      } else if (c != '0') {
        throw std::invalid_argument("grid_from_text: cells must be '0' or '1'");
      }
    }
  }
  return g;
}

}  // namespace percoloc
