#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "percoloc/geometry.hpp"
#include "percoloc/grid_bootstrap.hpp"
#include "percoloc/localization.hpp"
#include "percoloc/rng.hpp"

namespace percoloc {

/// Largest admissible ball radius for grid spacing r/sqrt(2): below this the
/// cell balls are disjoint and the per-cell events are independent.
inline double max_ball_radius(double r) { return r / (2.0 * std::sqrt(2.0)); }

/// Default ball radius: 0.9 of the bound, strictly inside it with a margin
/// against floating-point ties.
inline double default_ball_radius(double r) { return 0.9 * max_ball_radius(r); }

// Lattice of cells of side r/sqrt(2) overlaid on the unit square. Each cell
// knows the nodes inside the tau-ball around its center (torus metric), an
// occupancy flag, and a red/blue color (red = some anchor in the ball).
struct VirtualGrid {
  int cells_per_side{};  // L = floor(sqrt(2)/r)
  double spacing{};
  double tau{};
  double margin{};  // residual 1 - L*spacing, split evenly as a border
  std::vector<std::uint8_t> occupied;
  std::vector<std::uint8_t> red;
  std::vector<std::vector<std::uint32_t>> cell_members;

  std::size_t cell_index(int i, int j) const {
    return static_cast<std::size_t>(j) * cells_per_side + i;
  }
  Point center(int i, int j) const {
    return Point{margin / 2.0 + (i + 0.5) * spacing, margin / 2.0 + (j + 0.5) * spacing};
  }
  bool all_occupied() const {
    for (auto v : occupied)
      if (!v) return false;
    return true;
  }
  bool all_red() const {
    for (auto v : red)
      if (!v) return false;
    return true;
  }
};

inline VirtualGrid build_virtual_grid(const NodeSet& nodes, const std::vector<std::uint32_t>& anchors,
                                      double r, double tau) {
  if (!(r > 0.0) || !(r < 1.0)) {
    throw std::invalid_argument("build_virtual_grid: radio range must be in (0, 1)");
  }
  if (!(tau > 0.0) || !(tau < max_ball_radius(r))) {
    throw std::invalid_argument(
        "build_virtual_grid: tau must satisfy 0 < tau < r/(2*sqrt(2)) (disjoint-ball bound)");
  }
  VirtualGrid g;
  g.spacing = r / std::sqrt(2.0);
  g.cells_per_side = static_cast<int>(std::floor(std::sqrt(2.0) / r));
  if (g.cells_per_side > 10000) {
    throw std::invalid_argument("build_virtual_grid: radio range too small (grid would exceed 1e8 cells)");
  }
  g.tau = tau;
  g.margin = 1.0 - g.cells_per_side * g.spacing;

  const int L = g.cells_per_side;
  g.occupied.assign(static_cast<std::size_t>(L) * L, 0);
  g.red.assign(static_cast<std::size_t>(L) * L, 0);
  g.cell_members.assign(static_cast<std::size_t>(L) * L, {});

  std::vector<std::uint8_t> is_anchor(nodes.size(), 0);
  for (std::uint32_t a : anchors) {
    if (a >= nodes.size()) throw std::invalid_argument("build_virtual_grid: anchor index out of range");
    is_anchor[a] = 1;
  }

  if (!nodes.empty()) {
    BucketGrid index(nodes, tau, Metric::torus);
    for (int j = 0; j < L; ++j) {
      for (int i = 0; i < L; ++i) {
        auto& members = g.cell_members[g.cell_index(i, j)];
        index.collect_within(g.center(i, j), tau, [](std::uint32_t) { return true; }, members);
        if (members.empty()) continue;
        g.occupied[g.cell_index(i, j)] = 1;
        for (std::uint32_t idx : members) {
          if (is_anchor[idx]) {
            g.red[g.cell_index(i, j)] = 1;
            break;
          }
        }
      }
    }
  }
  return g;
}

/// Red flags as a bootstrap lattice under the 3-of-8 rule on the bounded grid.
inline GridState color_grid(const VirtualGrid& g) {
  GridState state(g.cells_per_side, BootstrapRule{Neighborhood::moore8, 3, Boundary::bounded});
  for (int j = 0; j < g.cells_per_side; ++j) {
    for (int i = 0; i < g.cells_per_side; ++i) {
      if (g.red[g.cell_index(i, j)]) state.set_active(i, j);
    }
  }
  return state;
}

struct ColorBootstrapResult {
  GridState final_colors;
  std::size_t steps{};
  bool fully_red{};
};

/// Runs blue->red percolation: a blue cell turns red once three of its eight
/// neighbors are red. Red is monotone.
inline ColorBootstrapResult run_color_bootstrap(const VirtualGrid& g) {
  auto run = run_bootstrap(color_grid(g));
  return ColorBootstrapResult{std::move(run.final_state), run.steps, run.fully_active};
}

struct CouplingOutcome {
  std::uint64_t seed{};
  std::uint32_t n_realized{};
  std::uint32_t m{};
  std::uint32_t resamples{};
  double r{};
  double tau{};
  double r_prime{};  // enhanced radio range r + 2*tau
  bool all_occupied{};
  bool grid_fully_red{};
  bool localization_complete_at_enhanced_range{};
  std::uint32_t rounds_grid{};
  std::uint32_t rounds_localization{};

  /// The sufficient-condition implication; a false value is a counterexample.
  bool coupling_holds() const {
    return !(all_occupied && grid_fully_red) || localization_complete_at_enhanced_range;
  }
};

/// One coupled trial: sample nodes and anchors, run the 3-of-8 color
/// percolation on the virtual grid, and independently run iterated
/// localization on the same realization at the enhanced range r + 2*tau.
inline CouplingOutcome run_coupled_experiment(double density, double r, double tau, std::uint32_t m,
                                              std::uint64_t seed, std::uint32_t max_resamples = 1000) {
  auto draw = detail::draw_realization(density, m, seed, max_resamples);
  VirtualGrid grid = build_virtual_grid(draw.nodes, draw.anchors, r, tau);
  auto colors = run_color_bootstrap(grid);
  const double r_prime = r + 2.0 * tau;
  auto loc = run_localization(draw.nodes, draw.anchors, r_prime, Metric::torus);

  CouplingOutcome out;
  out.seed = seed;
  out.n_realized = static_cast<std::uint32_t>(draw.nodes.size());
  out.m = m;
  out.resamples = draw.resamples;
  out.r = r;
  out.tau = tau;
  out.r_prime = r_prime;
  out.all_occupied = grid.all_occupied();
  out.grid_fully_red = colors.fully_red;
  out.localization_complete_at_enhanced_range = loc.fully_localized;
  out.rounds_grid = static_cast<std::uint32_t>(colors.steps);
  out.rounds_localization = loc.rounds_to_fixpoint;
  return out;
}

}  // namespace percoloc
