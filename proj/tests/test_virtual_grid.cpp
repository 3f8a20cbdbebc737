#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "percoloc/analytics.hpp"
#include "percoloc/virtual_grid.hpp"
#include "support/oracles.hpp"

using namespace percoloc;

TEST_CASE("build validates tau against the disjoint-ball bound") {
  NodeSet ns = sample_nodes(100.0, 1);
  REQUIRE_THROWS_AS(build_virtual_grid(ns, {}, 0.2, 0.2 / (2.0 * std::sqrt(2.0))),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(build_virtual_grid(ns, {}, 0.2, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(build_virtual_grid(ns, {}, 1.0, 0.01), std::invalid_argument);
  REQUIRE_NOTHROW(build_virtual_grid(ns, {}, 0.2, default_ball_radius(0.2)));
}

TEST_CASE("grid dimensions follow the spacing") {
  NodeSet ns = sample_nodes(100.0, 2);
  auto g = build_virtual_grid(ns, {}, 0.15, default_ball_radius(0.15));
  REQUIRE(g.cells_per_side == static_cast<int>(std::floor(std::sqrt(2.0) / 0.15)));
  REQUIRE_THAT(g.spacing, Catch::Matchers::WithinRel(0.15 / std::sqrt(2.0), 1e-14));
  REQUIRE_THAT(g.margin, Catch::Matchers::WithinAbs(1.0 - g.cells_per_side * g.spacing, 1e-14));
  // centers stay inside the unit square
  for (int j = 0; j < g.cells_per_side; ++j) {
    for (int i = 0; i < g.cells_per_side; ++i) {
      const Point c = g.center(i, j);
      REQUIRE(c.x > 0.0);
      REQUIRE(c.x < 1.0);
      REQUIRE(c.y > 0.0);
      REQUIRE(c.y < 1.0);
    }
  }
}

TEST_CASE("no anchors means no red cells; all anchors make red equal occupied") {
  NodeSet ns = sample_nodes(500.0, 33);
  const double r = 0.12, tau = default_ball_radius(0.12);
  auto none = build_virtual_grid(ns, {}, r, tau);
  for (auto red : none.red) REQUIRE(red == 0);

  std::vector<std::uint32_t> all(ns.size());
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  auto g = build_virtual_grid(ns, all, r, tau);
  REQUIRE(g.red == g.occupied);
}

TEST_CASE("occupancy and color flags match a brute-force membership scan") {
  NodeSet ns = sample_nodes(500.0, 44);
  auto anchors = sample_anchors(ns, 60, 45);
  const double r = 0.15, tau = default_ball_radius(0.15);
  auto g = build_virtual_grid(ns, anchors, r, tau);
  std::vector<std::uint8_t> is_anchor(ns.size(), 0);
  for (auto a : anchors) is_anchor[a] = 1;
  for (int j = 0; j < g.cells_per_side; ++j) {
    for (int i = 0; i < g.cells_per_side; ++i) {
      const Point c = g.center(i, j);
      std::set<std::uint32_t> expected;
      bool red = false;
      for (std::uint32_t k = 0; k < ns.size(); ++k) {
        if (squared_distance(ns.points[k], c, Metric::torus) <= tau * tau) {
          expected.insert(k);
          if (is_anchor[k]) red = true;
        }
      }
      const auto& members = g.cell_members[g.cell_index(i, j)];
      REQUIRE(std::set<std::uint32_t>(members.begin(), members.end()) == expected);
      REQUIRE(g.occupied[g.cell_index(i, j)] == (expected.empty() ? 0 : 1));
      REQUIRE(g.red[g.cell_index(i, j)] == (red ? 1 : 0));
    }
  }
}

TEST_CASE("cell balls are disjoint: no node appears in two member lists") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    NodeSet ns = sample_nodes(1500.0, 700 + s);
    auto g = build_virtual_grid(ns, {}, 0.1, default_ball_radius(0.1));
    std::vector<int> appearances(ns.size(), 0);
    for (const auto& members : g.cell_members) {
      for (auto idx : members) appearances[idx]++;
    }
    for (int a : appearances) REQUIRE(a <= 1);
  }
}

TEST_CASE("color bootstrap: all red stays red, one red cannot grow") {
  NodeSet ns = sample_nodes(200.0, 9);
  auto g = build_virtual_grid(ns, {}, 0.25, default_ball_radius(0.25));
  std::fill(g.red.begin(), g.red.end(), 1);
  auto full = run_color_bootstrap(g);
  REQUIRE(full.fully_red);
  REQUIRE(full.steps == 0);

  std::fill(g.red.begin(), g.red.end(), 0);
  g.red[g.cell_index(1, 1)] = 1;
  auto lone = run_color_bootstrap(g);
  REQUIRE_FALSE(lone.fully_red);
  REQUIRE(lone.steps == 0);
  REQUIRE(lone.final_colors.active_count() == 1);
}

TEST_CASE("face-satisfying red seeds turn the whole virtual grid red") {
  // 3-of-8 closure from the face condition, on the color lattice
  NodeSet ns = sample_nodes(200.0, 10);
  const double r = 0.27;  // floor(sqrt(2)/0.27) = 5 cells
  auto g = build_virtual_grid(ns, {}, r, default_ball_radius(r));
  REQUIRE(g.cells_per_side == 5);
  for (std::uint64_t s = 0; s < 25; ++s) {
    auto seeds = sample_face_satisfying(5, 900 + s);
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 5; ++i) g.red[g.cell_index(i, j)] = seeds.active(i, j) ? 1 : 0;
    REQUIRE(run_color_bootstrap(g).fully_red);
  }
}

TEST_CASE("degenerate anchor counts behave as expected in coupled runs") {
  auto zero = run_coupled_experiment(300.0, 0.2, default_ball_radius(0.2), 0, 51);
  REQUIRE_FALSE(zero.grid_fully_red);
  REQUIRE_FALSE(zero.localization_complete_at_enhanced_range);
  REQUIRE(zero.coupling_holds());

  NodeSet ns = sample_nodes(300.0, 52);
  std::vector<std::uint32_t> all(ns.size());
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  auto g = build_virtual_grid(ns, all, 0.2, default_ball_radius(0.2));
  REQUIRE((g.all_red() == g.all_occupied()));
  auto res = run_localization(ns, all, 0.2 + 2 * default_ball_radius(0.2));
  REQUIRE(res.fully_localized);
}

TEST_CASE("coupling holds on random trials across the anchor sweep") {
  int checked = 0;
  for (std::uint32_t m : {100u, 400u}) {
    for (std::uint64_t s = 0; s < 15; ++s) {
      auto out = run_coupled_experiment(2000.0, 0.15, default_ball_radius(0.15), m,
                                        split_seed(8200, m, s));
      REQUIRE(out.coupling_holds());
      if (out.all_occupied && out.grid_fully_red) ++checked;
    }
  }
  REQUIRE(checked > 0);  // the sweep must actually exercise the implication
}

TEST_CASE("newly red cells always see three localized nodes at the enhanced range") {
  // lockstep the color percolation against localization; every cell that turns
  // red at step k has all its ball members within r' of >= 3 nodes localized
  // by round k-1 (requires every cell occupied)
  const double density = 2000.0, r = 0.15;
  const double tau = default_ball_radius(r);
  const double r_prime = r + 2.0 * tau;
  int exercised = 0;
  for (std::uint64_t s = 0; s < 10 || exercised < 3; ++s) {
    REQUIRE(s < 40);  // enough occupied instances must exist at this density
    NodeSet ns = sample_nodes(density, 37000 + s);
    if (ns.size() < 400) continue;
    auto anchors = sample_anchors(ns, 400, 11 + s);
    auto vg = build_virtual_grid(ns, anchors, r, tau);
    if (!vg.all_occupied()) continue;
    ++exercised;

    GridState colors = color_grid(vg);
    AnchorState loc = AnchorState::initial(ns.size(), anchors);
    for (int step = 0; step < 2 * vg.cells_per_side * vg.cells_per_side; ++step) {
      GridState next_colors = bootstrap_step(colors);
      if (next_colors == colors) break;
      AnchorState next_loc = localize_step(ns, loc, r_prime);
      for (int j = 0; j < vg.cells_per_side; ++j) {
        for (int i = 0; i < vg.cells_per_side; ++i) {
          if (!next_colors.active(i, j) || colors.active(i, j)) continue;
          for (auto z : vg.cell_members[vg.cell_index(i, j)]) {
            std::size_t in_range = 0;
            for (std::uint32_t u = 0; u < ns.size(); ++u) {
              if (u == z || !loc.localized[u]) continue;
              if (squared_distance(ns.points[z], ns.points[u], Metric::torus) <=
                  r_prime * r_prime) {
                ++in_range;
              }
            }
            REQUIRE(in_range >= 3);
            REQUIRE(next_loc.localized[z] == 1);
          }
        }
      }
      colors = std::move(next_colors);
      loc = std::move(next_loc);
    }
  }
}

TEST_CASE("all-occupied frequency tracks the closed form") {
  // r chosen so the closed form's 2/r^2 cell count matches the realized
  // floor(sqrt(2)/r)^2 = 196 almost exactly, and tau so the probability sits
  // near 1/2 where the check has power
  const double n = 2000.0, r = 0.101;
  const double tau = 0.029980;
  const int trials = 1500;
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    NodeSet ns = sample_nodes(n, 52000 + t);
    hits += build_virtual_grid(ns, {}, r, tau).all_occupied() ? 1 : 0;
  }
  const double expected = prob_all_cells_occupied(n, r, tau);
  const double se = std::sqrt(expected * (1.0 - expected) / trials);
  REQUIRE(std::fabs(hits / double(trials) - expected) < 3.0 * se);
}

TEST_CASE("red frequency conditional on occupancy tracks q with radius tau") {
  const double n = 2000.0, r = 0.1, tau = 0.03;
  const std::uint32_t m = 300;
  std::uint64_t occupied = 0, red = 0;
  for (int t = 0; t < 300; ++t) {
    NodeSet ns = sample_nodes(n, 63000 + t);
    if (ns.size() < m) continue;
    auto anchors = sample_anchors(ns, m, 64000 + t);
    auto g = build_virtual_grid(ns, anchors, r, tau);
    for (std::size_t c = 0; c < g.occupied.size(); ++c) {
      occupied += g.occupied[c];
      red += g.red[c];
    }
  }
  const double q = red_probability_q(m, n, tau);
  const double q_hat = static_cast<double>(red) / static_cast<double>(occupied);
  const double se = std::sqrt(q * (1.0 - q) / static_cast<double>(occupied));
  REQUIRE(std::fabs(q_hat - q) < 3.0 * se);
}
