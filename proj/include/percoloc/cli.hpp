#pragma once

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "percoloc/analytics.hpp"
#include "percoloc/harness.hpp"
#include "percoloc/io.hpp"

namespace percoloc::cli {

namespace detail {

inline std::vector<double> parse_number_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "'" + item + "' is not a number");
    }
  }
  if (out.empty()) throw CLI::ValidationError(flag, "expected a comma-separated number list");
  return out;
}

inline OutputFormat parse_format(const std::string& f) {
  if (f == "csv") return OutputFormat::csv;
  if (f == "json") return OutputFormat::json;
  throw CLI::ValidationError("--format", "must be csv or json");
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Config files are flat key=value lines using the long flag names. They are
// merged by appending flags for keys the command line did not set, so explicit
// flags always win.
inline std::vector<std::string> apply_config_file(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string entry = trim(line);
    if (entry.empty() || entry[0] == '#') continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(entry.substr(0, eq));
    const std::string value = trim(entry.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
    }
    const std::string flag = "--" + key;
    bool present = false;
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) {
        present = true;
        break;
      }
    }
    if (!present) {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

// Shared result emission: no --out prints the full (deterministic) document to
// stdout; with --out the document goes to the file and stdout confirms it.
inline void emit(const ExperimentResult& result, const std::string& out_path,
                 const std::string& format, std::ostream& out) {
  const OutputFormat fmt = parse_format(format);
  if (out_path.empty()) {
    if (fmt == OutputFormat::csv) {
      write_csv(result, out);
    } else {
      out << to_json(result).dump(2) << "\n";
    }
  } else {
    write_results(result, fmt, out_path);
    out << "wrote " << out_path << "\n";
  }
}

struct CommonFlags {
  std::uint64_t seed{1};
  std::uint64_t trials{1};
  unsigned workers{0};  // 0 = all available cores
  std::string out_path;
  std::string format{"csv"};
  std::string config_path;
};

inline void add_config_flag(CLI::App* sub, std::string& path) {
  sub->add_option("--config", path,
                  "config file with flat key=value lines (same keys as long flags); "
                  "command-line flags win");
}

inline void add_common(CLI::App* sub, CommonFlags& flags, bool with_trials = true) {
  sub->add_option("--seed", flags.seed, "base seed; every output is a pure function of it")
      ->capture_default_str();
  if (with_trials) {
    sub->add_option("--trials", flags.trials, "independent trials (>= 1)")->capture_default_str();
  }
  sub->add_option("--workers", flags.workers,
                  "worker threads; 0 = all cores; results are identical for any value")
      ->capture_default_str();
  sub->add_option("--out", flags.out_path, "output file (default: write to stdout)");
  sub->add_option("--format", flags.format, "output format: csv or json")->capture_default_str();
  add_config_flag(sub, flags.config_path);
}

}  // namespace cli detail helpers

/// Entry point used by the binary and by tests. `args` excludes the program
/// name. Exit codes: 0 success, 1 usage/validation error, 2 property violation
/// detected during a run (the offending seeds are printed).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"percoloc: iterated localization and threshold bootstrap percolation simulator"};
  app.require_subcommand(1);

  int violation_exit = 0;

  // ---- gen ----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "sample a Poisson node set on the unit square and store it");
  double gen_n = 0.0;
  detail::CommonFlags gen_flags;
  gen->add_option("--n", gen_n, "node density (mean count on the unit square), > 0")->required();
  detail::add_common(gen, gen_flags, /*with_trials=*/false);
  gen->callback([&] {
    NodeSet nodes = sample_nodes(gen_n, gen_flags.seed);
    if (gen_flags.out_path.empty()) {
      out << node_set_to_json(nodes).dump(2) << "\n";
    } else {
      save_node_set(nodes, gen_flags.out_path);
      out << "wrote " << gen_flags.out_path << " (n_realized=" << nodes.size() << ")\n";
    }
  });

  // ---- localize -------------------------------------------------------------
  auto* loc = app.add_subcommand(
      "localize", "run iterated localization: a node localizes once >= 3 localized nodes are in range");
  double loc_n = 0.0, loc_r = 0.0, loc_eps = 1e-6;
  std::uint64_t loc_m = 0;
  std::string loc_nodes_path, loc_boundary = "torus", loc_collinearity = "ignore", loc_trace;
  detail::CommonFlags loc_flags;
  loc->add_option("--n", loc_n, "node density, > 0 (sampling mode)");
  loc->add_option("--nodes", loc_nodes_path, "node-set JSON fixture (replay mode, single run)");
  loc->add_option("--m", loc_m, "initial anchor count")->required();
  loc->add_option("--r", loc_r, "radio range in (0, 1)")->required();
  loc->add_option("--boundary", loc_boundary, "distance convention: torus or bounded")
      ->capture_default_str();
  loc->add_option("--collinearity", loc_collinearity, "triple test: ignore or epsilon")
      ->capture_default_str();
  loc->add_option("--epsilon", loc_eps, "min triangle area as a fraction of r^2 (epsilon mode)")
      ->capture_default_str();
  loc->add_option("--trace", loc_trace, "per-round CSV trace file (replay mode)");
  detail::add_common(loc, loc_flags);
  loc->callback([&] {
    if (!loc_nodes_path.empty()) {
      NodeSet nodes = load_node_set(loc_nodes_path);
      if (loc_m > nodes.size()) throw std::invalid_argument("--m exceeds fixture node count");
      auto anchors = sample_anchors(nodes, static_cast<std::uint32_t>(loc_m), loc_flags.seed);
      const Metric metric = loc_boundary == "bounded" ? Metric::bounded : Metric::torus;
      const CollinearityPolicy policy = loc_collinearity == "epsilon"
                                            ? CollinearityPolicy::Epsilon(loc_eps)
                                            : CollinearityPolicy::Ignore();
      auto res = run_localization(nodes, anchors, loc_r, metric, policy, std::nullopt,
                                  /*want_trace=*/true);
      nlohmann::json j{{"n_realized", nodes.size()},
                       {"m", loc_m},
                       {"r", loc_r},
                       {"rounds", res.rounds_to_fixpoint},
                       {"localized_count", res.final_localized_count},
                       {"fully_localized", res.fully_localized}};
      if (loc_flags.out_path.empty()) {
        out << j.dump(2) << "\n";
      } else {
        write_file(loc_flags.out_path, j.dump(2) + "\n");
        out << "wrote " << loc_flags.out_path << "\n";
      }
      if (!loc_trace.empty()) {
        std::ostringstream csv;
        csv << "round,newly_localized_count\n";
        const auto& hist = res.trace->newly_localized_history;
        for (std::size_t i = 0; i < hist.size(); ++i) {
          csv << (i + 1) << "," << hist[i].size() << "\n";
        }
        write_file(loc_trace, csv.str());
        out << "wrote " << loc_trace << "\n";
      }
      return;
    }
    ExperimentSpec spec;
    spec.kind = ExperimentKind::localization;
    spec.parameters = {{"n", fmt_g(loc_n)},
                       {"r", fmt_g(loc_r)},
                       {"m", std::to_string(loc_m)},
                       {"boundary", loc_boundary},
                       {"collinearity", loc_collinearity}};
    if (loc_collinearity == "epsilon") spec.parameters["epsilon"] = fmt_g(loc_eps);
    spec.trials = loc_flags.trials;
    spec.base_seed = loc_flags.seed;
    detail::emit(run_experiment(spec, loc_flags.workers), loc_flags.out_path, loc_flags.format, out);
  });

  // ---- bootstrap ------------------------------------------------------------
  auto* boot = app.add_subcommand("bootstrap",
                                  "threshold bootstrap percolation on an LxL grid, from a fixture "
                                  "or from Bernoulli(p) initial activation");
  int boot_L = 0, boot_theta = 0;
  double boot_p = -1.0;
  std::string boot_rule = "vn4", boot_boundary = "bounded", boot_fixture;
  detail::CommonFlags boot_flags;
  boot->add_option("--L", boot_L, "grid side in vertices");
  boot->add_option("--p", boot_p, "initial activation probability in [0, 1]");
  boot->add_option("--rule", boot_rule, "neighborhood: vn4 (4 neighbors) or moore8 (8 neighbors)")
      ->capture_default_str();
  boot->add_option("--theta", boot_theta, "activation threshold in [1, 8]; default 2 for vn4, 3 for moore8");
  boot->add_option("--boundary", boot_boundary, "grid boundary: bounded or torus")
      ->capture_default_str();
  boot->add_option("--fixture", boot_fixture, "text fixture: lines of 0/1, one row per line");
  detail::add_common(boot, boot_flags);
  boot->callback([&] {
    if (boot_theta == 0) boot_theta = boot_rule == "moore8" ? 3 : 2;
    if (!boot_fixture.empty()) {
      BootstrapRule rule{boot_rule == "moore8" ? Neighborhood::moore8 : Neighborhood::vn4,
                         boot_theta,
                         boot_boundary == "torus" ? Boundary::torus : Boundary::bounded};
      GridState grid = load_grid_fixture(boot_fixture, rule);
      if (boot_L != 0 && boot_L != grid.side()) {
        throw std::invalid_argument("--L disagrees with the fixture side");
      }
      auto run = run_bootstrap(grid);
      out << "config: rule=" << boot_rule << " theta=" << boot_theta
          << " boundary=" << boot_boundary << " L=" << grid.side()
          << " fixture=" << boot_fixture << "\n";
      out << "fully_active=" << (run.fully_active ? "true" : "false") << "\n";
      out << "steps=" << run.steps << "\n";
      out << "active_count=" << run.final_state.active_count() << "\n";
      if (!boot_flags.out_path.empty()) {
        save_grid_fixture(run.final_state, boot_flags.out_path);
        out << "wrote " << boot_flags.out_path << "\n";
      }
      return;
    }
    if (boot_L <= 0 || boot_p < 0.0) {
      throw std::invalid_argument("random mode needs --L and --p (or pass --fixture)");
    }
    ExperimentSpec spec;
    spec.kind = ExperimentKind::bootstrap;
    spec.parameters = {{"L", std::to_string(boot_L)},
                       {"p", fmt_g(boot_p)},
                       {"theta", std::to_string(boot_theta)},
                       {"rule", boot_rule},
                       {"boundary", boot_boundary}};
    spec.trials = boot_flags.trials;
    spec.base_seed = boot_flags.seed;
    detail::emit(run_experiment(spec, boot_flags.workers), boot_flags.out_path, boot_flags.format,
                 out);
  });

  // ---- critical -------------------------------------------------------------
  auto* crit = app.add_subcommand(
      "critical", "Monte-Carlo estimate of the critical initial-activation probability");
  int crit_L = 0, crit_theta = 0;
  double crit_resolution = 0.02;
  std::string crit_rule = "vn4", crit_boundary = "bounded";
  detail::CommonFlags crit_flags;
  crit_flags.trials = 200;
  crit->add_option("--L", crit_L, "grid side in vertices")->required();
  crit->add_option("--rule", crit_rule, "neighborhood: vn4 or moore8")->capture_default_str();
  crit->add_option("--theta", crit_theta, "activation threshold in [1, 8]; default 2 for vn4, 3 for moore8");
  crit->add_option("--boundary", crit_boundary, "grid boundary: bounded or torus")
      ->capture_default_str();
  crit->add_option("--resolution", crit_resolution,
                   "coarse sweep step for p; refined at resolution/10 near the transition")
      ->capture_default_str();
  detail::add_common(crit, crit_flags);
  crit->callback([&] {
    if (crit_theta == 0) crit_theta = crit_rule == "moore8" ? 3 : 2;
    ExperimentSpec spec;
    spec.kind = ExperimentKind::critical_sweep;
    spec.parameters = {{"L", std::to_string(crit_L)},
                       {"theta", std::to_string(crit_theta)},
                       {"rule", crit_rule},
                       {"boundary", crit_boundary},
                       {"resolution", fmt_g(crit_resolution)}};
    spec.trials = crit_flags.trials;
    spec.base_seed = crit_flags.seed;
    detail::emit(run_experiment(spec, crit_flags.workers), crit_flags.out_path, crit_flags.format,
                 out);
  });

  // ---- coupling -------------------------------------------------------------
  auto* coup = app.add_subcommand(
      "coupling", "coupled trials: 3-of-8 color percolation on the virtual grid vs iterated "
                  "localization at the enhanced range r + 2*tau on the same realization");
  double coup_n = 0.0, coup_r = 0.0, coup_tau = 0.0;
  std::uint64_t coup_m = 0;
  detail::CommonFlags coup_flags;
  coup->add_option("--n", coup_n, "node density, > 0")->required();
  coup->add_option("--r", coup_r, "radio range in (0, 1)")->required();
  coup->add_option("--tau", coup_tau,
                   "cell ball radius; default 0.9 * r/(2*sqrt(2)), must stay below r/(2*sqrt(2))");
  coup->add_option("--m", coup_m, "anchor count")->required();
  detail::add_common(coup, coup_flags);
  coup->callback([&] {
    ExperimentSpec spec;
    spec.kind = ExperimentKind::coupling;
    spec.parameters = {{"n", fmt_g(coup_n)}, {"r", fmt_g(coup_r)}, {"m", std::to_string(coup_m)}};
    if (coup_tau > 0.0) spec.parameters["tau"] = fmt_g(coup_tau);
    spec.trials = coup_flags.trials;
    spec.base_seed = coup_flags.seed;
    ExperimentResult result = run_experiment(spec, coup_flags.workers);
    detail::emit(result, coup_flags.out_path, coup_flags.format, out);
    for (const auto& rec : result.records) {
      if (!rec.success) {
        err << "coupling violation: grid fully red but localization incomplete at seed="
            << rec.seed << " (trial " << rec.trial << ")\n";
        violation_exit = 2;
      }
    }
  });

  // ---- min-anchors ----------------------------------------------------------
  auto* mina = app.add_subcommand(
      "min-anchors", "bisect for the smallest anchor count whose full-localization frequency "
                     "meets the target (Wilson lower bound)");
  double mina_n = 0.0, mina_r = 0.0, mina_target = 0.9;
  std::string mina_boundary = "torus";
  detail::CommonFlags mina_flags;
  mina_flags.trials = 100;
  mina->add_option("--n", mina_n, "node density, > 0")->required();
  mina->add_option("--r", mina_r, "radio range in (0, 1)")->required();
  mina->add_option("--target", mina_target, "success probability target in (0, 1)")
      ->capture_default_str();
  mina->add_option("--boundary", mina_boundary, "distance convention: torus or bounded")
      ->capture_default_str();
  detail::add_common(mina, mina_flags);
  mina->callback([&] {
    ExperimentSpec spec;
    spec.kind = ExperimentKind::min_anchors;
    spec.parameters = {{"n", fmt_g(mina_n)},
                       {"r", fmt_g(mina_r)},
                       {"target", fmt_g(mina_target)},
                       {"boundary", mina_boundary}};
    spec.trials = mina_flags.trials;
    spec.base_seed = mina_flags.seed;
    detail::emit(run_experiment(spec, mina_flags.workers), mina_flags.out_path, mina_flags.format,
                 out);
  });

  // ---- sufficient-m -----------------------------------------------------------
  auto* suff = app.add_subcommand(
      "sufficient-m", "closed-form sufficient anchor count: smallest m with q(m) above the "
                      "red-probability threshold");
  double suff_n = 0.0, suff_r = 0.0, suff_c_radius = 0.0, suff_c_prime = 1.0;
  std::string suff_rho = "paper_r";
  suff->add_option("--n", suff_n, "node density, > 0")->required();
  suff->add_option("--r", suff_r, "radio range; alternative to --c-radius");
  suff->add_option("--c-radius", suff_c_radius,
                   "connectivity constant; sets r = sqrt(c_radius * ln(n) / n)");
  suff->add_option("--c-prime", suff_c_prime, "threshold constant c'")->capture_default_str();
  suff->add_option("--rho", suff_rho,
                   "radius used inside q: paper_r (rho = r) or tau (rho = 0.9*r/(2*sqrt(2)))")
      ->capture_default_str();
  std::string suff_config;
  detail::add_config_flag(suff, suff_config);
  suff->callback([&] {
    if ((suff_r > 0.0) == (suff_c_radius > 0.0)) {
      throw std::invalid_argument("pass exactly one of --r or --c-radius");
    }
    const double r = suff_r > 0.0 ? suff_r : connectivity_radius(suff_n, suff_c_radius);
    const double rho = suff_rho == "tau" ? default_ball_radius(r) : r;
    if (suff_rho != "tau" && suff_rho != "paper_r") {
      throw std::invalid_argument("--rho must be paper_r or tau");
    }
    auto res = sufficient_anchors_detail(suff_n, r, suff_c_prime, rho);
    out << "config: n=" << fmt_g(suff_n) << " r=" << fmt_g(r) << " c_prime=" << fmt_g(suff_c_prime)
        << " rho=" << suff_rho << "\n";
    out << "m=" << res.m << "\n";
    out << "q_at_m=" << fmt_g(res.q_at_m) << "\n";
    out << "threshold=" << fmt_g(res.threshold) << "\n";
  });

  // ---- scaling ---------------------------------------------------------------
  auto* scal = app.add_subcommand(
      "scaling", "sufficient-anchor table over (n, c_radius) with fitted log-log slopes");
  std::string scal_n_list, scal_c_list, scal_rho = "paper_r", scal_out, scal_slopes_out;
  double scal_c_prime = 1.0;
  scal->add_option("--n", scal_n_list, "comma-separated densities, e.g. 1e4,1e5,1e6")->required();
  scal->add_option("--c-radius", scal_c_list, "comma-separated connectivity constants, e.g. 4,8,16")
      ->required();
  scal->add_option("--c-prime", scal_c_prime, "threshold constant c'")->capture_default_str();
  scal->add_option("--rho", scal_rho, "radius mode inside q: paper_r or tau")->capture_default_str();
  scal->add_option("--out", scal_out, "CSV output file (default: stdout)");
  scal->add_option("--slopes-out", scal_slopes_out,
                   "slopes JSON file (default: <out>.slopes.json when --out is set)");
  std::string scal_config;
  detail::add_config_flag(scal, scal_config);
  scal->callback([&] {
    if (scal_rho != "tau" && scal_rho != "paper_r") {
      throw std::invalid_argument("--rho must be paper_r or tau");
    }
    auto ns = detail::parse_number_list(scal_n_list, "--n");
    auto cs = detail::parse_number_list(scal_c_list, "--c-radius");
    auto table = scaling_table(ns, cs, scal_c_prime,
                               scal_rho == "tau" ? RhoMode::tau : RhoMode::paper_r);
    std::ostringstream csv;
    csv << "# config: c_prime=" << fmt_g(scal_c_prime) << " rho=" << scal_rho << "\n";
    csv << "n,c_radius,r,threshold,m_sufficient,feasible\n";
    for (const auto& row : table.rows) {
      csv << fmt_g(row.n) << "," << fmt_g(row.c_radius) << "," << fmt_g(row.r) << ","
          << fmt_g(row.threshold) << "," << row.m_sufficient << "," << (row.feasible ? 1 : 0)
          << "\n";
    }
    for (const auto& [c, slope] : table.slopes) {
      csv << "# slope c_radius=" << fmt_g(c) << ": "
          << (slope ? fmt_g(*slope) : std::string("undefined")) << "\n";
    }
    nlohmann::json slopes = nlohmann::json::array();
    for (const auto& [c, slope] : table.slopes) {
      nlohmann::json entry{{"c_radius", c}};
      if (slope) {
        entry["slope"] = *slope;
      } else {
        entry["slope"] = nullptr;
      }
      slopes.push_back(std::move(entry));
    }
    if (scal_out.empty()) {
      out << csv.str();
      out << slopes.dump(2) << "\n";
    } else {
      write_file(scal_out, csv.str());
      const std::string spath = scal_slopes_out.empty() ? scal_out + ".slopes.json" : scal_slopes_out;
      write_file(spath, slopes.dump(2) + "\n");
      out << "wrote " << scal_out << "\n";
      out << "wrote " << spath << "\n";
    }
  });

  // ---- occupancy --------------------------------------------------------------
  auto* occ = app.add_subcommand("occupancy",
                                 "closed-form probability that every virtual-grid cell ball holds "
                                 "at least one node");
  double occ_n = 0.0, occ_r = 0.0, occ_tau = 0.0;
  occ->add_option("--n", occ_n, "node density, > 0")->required();
  occ->add_option("--r", occ_r, "radio range (grid spacing is r/sqrt(2))")->required();
  occ->add_option("--tau", occ_tau, "cell ball radius, > 0")->required();
  std::string occ_config;
  detail::add_config_flag(occ, occ_config);
  occ->callback([&] {
    const double p = prob_all_cells_occupied(occ_n, occ_r, occ_tau);
    out << "config: n=" << fmt_g(occ_n) << " r=" << fmt_g(occ_r) << " tau=" << fmt_g(occ_tau)
        << "\n";
    out << "p_all_occupied=" << fmt_g(p) << "\n";
  });

  // ---- parse / dispatch ---------------------------------------------------------
  try {
    const std::vector<std::string> merged = detail::apply_config_file(args);
    std::vector<const char*> argv;
    argv.reserve(merged.size() + 1);
    argv.push_back("percoloc");
    for (const auto& a : merged) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  } catch (const SpecError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return violation_exit;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace percoloc::cli
