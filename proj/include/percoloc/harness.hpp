#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "percoloc/analytics.hpp"
#include "percoloc/exec.hpp"
#include "percoloc/geometry.hpp"
#include "percoloc/grid_bootstrap.hpp"
#include "percoloc/localization.hpp"
#include "percoloc/stats.hpp"
#include "percoloc/virtual_grid.hpp"

namespace percoloc {

inline constexpr const char* kVersion = "0.1.0";

/// %.12g rendering used for every floating value the tools emit, so seeded
/// runs are byte-comparable.
inline std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

enum class ExperimentKind { localization, bootstrap, coupling, critical_sweep, min_anchors };

inline const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::localization: return "localization";
    case ExperimentKind::bootstrap: return "bootstrap";
    case ExperimentKind::coupling: return "coupling";
    case ExperimentKind::critical_sweep: return "critical_sweep";
    case ExperimentKind::min_anchors: return "min_anchors";
  }
  return "?";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "localization") return ExperimentKind::localization;
  if (s == "bootstrap") return ExperimentKind::bootstrap;
  if (s == "coupling") return ExperimentKind::coupling;
  if (s == "critical_sweep") return ExperimentKind::critical_sweep;
  if (s == "min_anchors") return ExperimentKind::min_anchors;
  throw std::invalid_argument("unknown experiment kind: " + s);
}

/// Declarative Monte-Carlo run: what to simulate, with which parameters, how
/// many trials, from which base seed. Parameters are raw strings; validation
/// happens before any work starts.
struct ExperimentSpec {
  ExperimentKind kind{ExperimentKind::localization};
  std::map<std::string, std::string> parameters;
  std::uint64_t trials{1};
  std::uint64_t base_seed{1};
};

/// Validation failure carrying every problem found, not just the first.
class SpecError : public std::runtime_error {
 public:
  explicit SpecError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid experiment spec:";
    for (const auto& i : v) s += "\n  - " + i;
    return s;
  }
  std::vector<std::string> issues_;
};

namespace detail {

struct ParsedParams {
  double n{}, r{}, tau{}, p{}, resolution{}, target{}, c_prime{}, c_radius{}, epsilon{};
  std::uint32_t m{};
  int L{}, theta{};
  BootstrapRule rule;
  Metric metric{Metric::torus};
  CollinearityPolicy policy{};
  bool has_tau{false};
};

class ParamReader {
 public:
  explicit ParamReader(const std::map<std::string, std::string>& params) : params_(&params) {}

  std::optional<std::string> raw(const std::string& key) const {
    auto it = params_->find(key);
    if (it == params_->end()) return std::nullopt;
    return it->second;
  }

  double number(const std::string& key, const char* constraint, auto&& pred) {
    auto v = raw(key);
    if (!v) {
      issues.push_back("missing parameter '" + key + "' (" + constraint + ")");
      return 0.0;
    }
    try {
      std::size_t pos = 0;
      double d = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("trailing junk");
      if (!pred(d)) {
        issues.push_back("parameter '" + key + "' = " + *v + " violates: " + constraint);
        return 0.0;
      }
      return d;
    } catch (const std::exception&) {
      issues.push_back("parameter '" + key + "' = " + *v + " is not a number");
      return 0.0;
    }
  }

  std::vector<std::string> issues;

 private:
  const std::map<std::string, std::string>* params_;
};

inline ParsedParams parse_spec(const ExperimentSpec& spec) {
  ParamReader rd(spec.parameters);
  ParsedParams out;
  auto positive = [](double v) { return v > 0.0; };
  auto nonneg = [](double v) { return v >= 0.0; };

  const auto kind = spec.kind;
  if (kind == ExperimentKind::localization || kind == ExperimentKind::coupling ||
      kind == ExperimentKind::min_anchors) {
    out.n = rd.number("n", "node density, > 0", positive);
    out.r = rd.number("r", "radio range, > 0", positive);
  }
  if (kind == ExperimentKind::localization || kind == ExperimentKind::coupling) {
    out.m = static_cast<std::uint32_t>(
        rd.number("m", "anchor count, >= 0 integer", [](double v) {
          return v >= 0.0 && v == std::floor(v) && v <= 4e9;
        }));
  }
  if (kind == ExperimentKind::coupling) {
    if (rd.raw("tau").has_value()) {
      out.tau = rd.number("tau", "ball radius, 0 < tau < r/(2*sqrt(2))", positive);
      out.has_tau = true;
    }
  }
  if (kind == ExperimentKind::bootstrap || kind == ExperimentKind::critical_sweep) {
    out.L = static_cast<int>(rd.number("L", "grid side, >= 1 integer", [](double v) {
      return v >= 1.0 && v == std::floor(v) && v <= 65536.0;
    }));
    out.theta = static_cast<int>(rd.number("theta", "threshold, integer in [1, 8]", [](double v) {
      return v >= 1.0 && v <= 8.0 && v == std::floor(v);
    }));
    const auto rule = rd.raw("rule").value_or("vn4");
    if (rule == "vn4") {
      out.rule.neighborhood = Neighborhood::vn4;
    } else if (rule == "moore8") {
      out.rule.neighborhood = Neighborhood::moore8;
    } else {
      rd.issues.push_back("parameter 'rule' must be vn4 or moore8, got '" + rule + "'");
    }
    const auto boundary = rd.raw("boundary").value_or("bounded");
    if (boundary == "bounded") {
      out.rule.boundary = Boundary::bounded;
    } else if (boundary == "torus") {
      out.rule.boundary = Boundary::torus;
    } else {
      rd.issues.push_back("parameter 'boundary' must be bounded or torus, got '" + boundary + "'");
    }
    out.rule.threshold = out.theta >= 1 && out.theta <= 8 ? out.theta : 1;
  }
  if (kind == ExperimentKind::bootstrap) {
    out.p = rd.number("p", "activation probability in [0, 1]",
                      [](double v) { return v >= 0.0 && v <= 1.0; });
  }
  if (kind == ExperimentKind::critical_sweep) {
    out.resolution = rd.number("resolution", "sweep step in (0, 1)",
                               [](double v) { return v > 0.0 && v < 1.0; });
  }
  if (kind == ExperimentKind::min_anchors) {
    out.target = rd.number("target", "success probability in (0, 1)",
                           [](double v) { return v > 0.0 && v < 1.0; });
  }
  if (kind == ExperimentKind::localization || kind == ExperimentKind::min_anchors) {
    const auto metric = rd.raw("boundary").value_or("torus");
    if (metric == "torus") {
      out.metric = Metric::torus;
    } else if (metric == "bounded") {
      out.metric = Metric::bounded;
    } else {
      rd.issues.push_back("parameter 'boundary' must be torus or bounded, got '" + metric + "'");
    }
    const auto col = rd.raw("collinearity").value_or("ignore");
    if (col == "ignore") {
      out.policy = CollinearityPolicy::Ignore();
    } else if (col == "epsilon") {
      double eps = 1e-6;
      if (rd.raw("epsilon")) eps = rd.number("epsilon", "area fraction, >= 0", nonneg);
      out.policy = CollinearityPolicy::Epsilon(eps);
    } else {
      rd.issues.push_back("parameter 'collinearity' must be ignore or epsilon, got '" + col + "'");
    }
  }
  if (spec.trials < 1) rd.issues.push_back("trials must be >= 1");

  if (!rd.issues.empty()) throw SpecError(std::move(rd.issues));

  if (kind == ExperimentKind::coupling && !out.has_tau) {
    out.tau = default_ball_radius(out.r);
    out.has_tau = true;
  }
  return out;
}

}  // namespace detail

/// Validates a spec, collecting every issue; throws SpecError when invalid.
inline void validate_spec(const ExperimentSpec& spec) { (void)detail::parse_spec(spec); }

struct TrialRecord {
  std::uint64_t trial{};
  std::uint64_t seed{};
  bool success{};
  std::uint32_t resamples{};
  std::vector<std::pair<std::string, double>> fields;  // kind-specific, stable order

  double field(const std::string& name) const {
    for (const auto& [k, v] : fields) {
      if (k == name) return v;
    }
    throw std::out_of_range("TrialRecord: no field " + name);
  }
};

struct Aggregate {
  std::uint64_t successes{};
  std::uint64_t trials{};
  double fraction{};
  double wilson_low{};
  double wilson_high{};
};

inline Aggregate aggregate_from_records(const std::vector<TrialRecord>& records) {
  Aggregate agg;
  agg.trials = records.size();
  for (const auto& r : records) agg.successes += r.success ? 1 : 0;
  if (agg.trials > 0) {
    agg.fraction = static_cast<double>(agg.successes) / static_cast<double>(agg.trials);
    const Interval iv = wilson_interval(agg.successes, agg.trials);
    agg.wilson_low = iv.low;
    agg.wilson_high = iv.high;
  }
  return agg;
}

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<TrialRecord> records;
  Aggregate aggregate;
  std::vector<std::pair<std::string, double>> summary;  // sweep outputs (p_hat, m_hat, ...)
  double wall_ms{};
};

/// Runs the spec with `worker_budget` threads. Trial i always derives its seed
/// as split(base_seed, i), so the result is identical for any budget.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, unsigned worker_budget = 1) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::ParsedParams pp = detail::parse_spec(spec);

  ExperimentResult result;
  result.spec = spec;

  switch (spec.kind) {
    case ExperimentKind::localization: {
      result.records.assign(spec.trials, {});
      parallel_for(spec.trials, worker_budget, [&](std::uint64_t t) {
        const std::uint64_t s = split_seed(spec.base_seed, t);
        auto draw = detail::draw_realization(pp.n, pp.m, s, 1000);
        auto loc = run_localization(draw.nodes, draw.anchors, pp.r, pp.metric, pp.policy);
        TrialRecord rec;
        rec.trial = t;
        rec.seed = s;
        rec.success = loc.fully_localized;
        rec.resamples = draw.resamples;
        rec.fields = {{"n_realized", static_cast<double>(draw.nodes.size())},
                      {"m", static_cast<double>(pp.m)},
                      {"r", pp.r},
                      {"rounds", static_cast<double>(loc.rounds_to_fixpoint)},
                      {"localized_count", static_cast<double>(loc.final_localized_count)},
                      {"fully_localized", loc.fully_localized ? 1.0 : 0.0}};
        result.records[t] = std::move(rec);
      });
      break;
    }
    case ExperimentKind::bootstrap: {
      result.records.assign(spec.trials, {});
      parallel_for(spec.trials, worker_budget, [&](std::uint64_t t) {
        const std::uint64_t s = split_seed(spec.base_seed, t);
        auto run = run_bootstrap(random_initial(pp.L, pp.p, s, pp.rule));
        TrialRecord rec;
        rec.trial = t;
        rec.seed = s;
        rec.success = run.fully_active;
        rec.fields = {{"L", static_cast<double>(pp.L)},
                      {"p", pp.p},
                      {"steps", static_cast<double>(run.steps)},
                      {"active_count", static_cast<double>(run.final_state.active_count())},
                      {"fully_active", run.fully_active ? 1.0 : 0.0}};
        result.records[t] = std::move(rec);
      });
      break;
    }
    case ExperimentKind::coupling: {
      result.records.assign(spec.trials, {});
      parallel_for(spec.trials, worker_budget, [&](std::uint64_t t) {
        const std::uint64_t s = split_seed(spec.base_seed, t);
        CouplingOutcome out = run_coupled_experiment(pp.n, pp.r, pp.tau, pp.m, s);
        TrialRecord rec;
        rec.trial = t;
        rec.seed = s;
        rec.success = out.coupling_holds();
        rec.resamples = out.resamples;
        rec.fields = {{"n_realized", static_cast<double>(out.n_realized)},
                      {"m", static_cast<double>(out.m)},
                      {"r", out.r},
                      {"tau", out.tau},
                      {"all_occupied", out.all_occupied ? 1.0 : 0.0},
                      {"fully_red", out.grid_fully_red ? 1.0 : 0.0},
                      {"localized_all", out.localization_complete_at_enhanced_range ? 1.0 : 0.0},
                      {"rounds_grid", static_cast<double>(out.rounds_grid)},
                      {"rounds_localization", static_cast<double>(out.rounds_localization)}};
        result.records[t] = std::move(rec);
      });
      break;
    }
    case ExperimentKind::critical_sweep: {
      auto est = estimate_critical_p(pp.L, pp.rule, spec.trials, pp.resolution, spec.base_seed,
                                     worker_budget);
      for (std::size_t i = 0; i < est.curve.size(); ++i) {
        const auto& pt = est.curve[i];
        TrialRecord rec;
        rec.trial = i;
        rec.seed = spec.base_seed;
        rec.success = 2 * pt.successes >= pt.trials;
        rec.fields = {{"p", pt.p},
                      {"trials", static_cast<double>(pt.trials)},
                      {"successes", static_cast<double>(pt.successes)},
                      {"wilson_low", pt.wilson_low},
                      {"wilson_high", pt.wilson_high}};
        result.records.push_back(std::move(rec));
      }
      result.summary = {{"p_hat", est.p_hat}};
      if (pp.L >= 2) result.summary.emplace_back("holroyd_pc", holroyd_pc(pp.L));
      break;
    }
    case ExperimentKind::min_anchors: {
      MinAnchorsOptions opts;
      opts.metric = pp.metric;
      opts.policy = pp.policy;
      opts.workers = worker_budget;
      auto est = min_anchors_empirical(pp.n, pp.r, spec.trials, pp.target, spec.base_seed, opts);
      for (std::size_t i = 0; i < est.probes.size(); ++i) {
        const auto& pr = est.probes[i];
        TrialRecord rec;
        rec.trial = i;
        rec.seed = spec.base_seed;
        rec.success = pr.wilson_low >= pp.target;
        rec.fields = {{"m", static_cast<double>(pr.m)},
                      {"trials", static_cast<double>(pr.trials)},
                      {"successes", static_cast<double>(pr.successes)},
                      {"wilson_low", pr.wilson_low},
                      {"wilson_high", pr.wilson_high}};
        result.records.push_back(std::move(rec));
      }
      result.summary = {{"achievable", est.achievable ? 1.0 : 0.0},
                        {"m_hat", static_cast<double>(est.m_hat)},
                        {"bracket_low", static_cast<double>(est.bracket_low)}};
      break;
    }
  }

  result.aggregate = aggregate_from_records(result.records);
  result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// --- serialization -----------------------------------------------------------

inline nlohmann::json to_json(const ExperimentResult& result) {
  nlohmann::json j;
  j["spec"] = {{"kind", to_string(result.spec.kind)},
               {"parameters", result.spec.parameters},
               {"trials", result.spec.trials},
               {"base_seed", result.spec.base_seed}};
  j["results"] = nlohmann::json::array();
  for (const auto& rec : result.records) {
    nlohmann::json r{{"trial", rec.trial},
                     {"seed", rec.seed},
                     {"success", rec.success},
                     {"resamples", rec.resamples}};
    nlohmann::json f;
    for (const auto& [k, v] : rec.fields) f[k] = v;
    r["fields"] = std::move(f);
    j["results"].push_back(std::move(r));
  }
  j["aggregate"] = {{"successes", result.aggregate.successes},
                    {"trials", result.aggregate.trials},
                    {"fraction", result.aggregate.fraction},
                    {"wilson_low", result.aggregate.wilson_low},
                    {"wilson_high", result.aggregate.wilson_high}};
  if (!result.summary.empty()) {
    nlohmann::json s;
    for (const auto& [k, v] : result.summary) s[k] = v;
    j["summary"] = std::move(s);
  }
  j["meta"] = {{"version", kVersion}, {"wall_ms", result.wall_ms}};
  return j;
}

inline ExperimentResult result_from_json(const nlohmann::json& j) {
  ExperimentResult result;
  result.spec.kind = experiment_kind_from_string(j.at("spec").at("kind").get<std::string>());
  result.spec.parameters = j.at("spec").at("parameters").get<std::map<std::string, std::string>>();
  result.spec.trials = j.at("spec").at("trials").get<std::uint64_t>();
  result.spec.base_seed = j.at("spec").at("base_seed").get<std::uint64_t>();
  for (const auto& r : j.at("results")) {
    TrialRecord rec;
    rec.trial = r.at("trial").get<std::uint64_t>();
    rec.seed = r.at("seed").get<std::uint64_t>();
    rec.success = r.at("success").get<bool>();
    rec.resamples = r.at("resamples").get<std::uint32_t>();
    for (const auto& [k, v] : r.at("fields").items()) rec.fields.emplace_back(k, v.get<double>());
    result.records.push_back(std::move(rec));
  }
  result.aggregate.successes = j.at("aggregate").at("successes").get<std::uint64_t>();
  result.aggregate.trials = j.at("aggregate").at("trials").get<std::uint64_t>();
  result.aggregate.fraction = j.at("aggregate").at("fraction").get<double>();
  result.aggregate.wilson_low = j.at("aggregate").at("wilson_low").get<double>();
  result.aggregate.wilson_high = j.at("aggregate").at("wilson_high").get<double>();
  if (j.contains("summary")) {
    for (const auto& [k, v] : j.at("summary").items()) result.summary.emplace_back(k, v.get<double>());
  }
  result.wall_ms = j.at("meta").at("wall_ms").get<double>();
  return result;
}

namespace detail {

inline std::vector<std::string> csv_field_order(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::localization:
      return {"n_realized", "m", "r", "rounds", "localized_count", "fully_localized"};
    case ExperimentKind::bootstrap:
      return {"L", "p", "steps", "active_count", "fully_active"};
    case ExperimentKind::coupling:
      return {"n_realized", "m",           "r",          "tau",
              "all_occupied", "fully_red", "localized_all", "rounds_grid",
              "rounds_localization"};
    case ExperimentKind::critical_sweep:
      return {"p", "trials", "successes", "wilson_low", "wilson_high"};
    case ExperimentKind::min_anchors:
      return {"m", "trials", "successes", "wilson_low", "wilson_high"};
  }
  return {};
}

inline std::string config_comment(const ExperimentSpec& spec) {
  std::string line = "# config: kind=" + std::string(to_string(spec.kind));
  for (const auto& [k, v] : spec.parameters) line += " " + k + "=" + v;
  line += " trials=" + std::to_string(spec.trials);
  line += " base_seed=" + std::to_string(spec.base_seed);
  return line;
}

}  // namespace detail

/// CSV with the per-kind column schema; the effective config and the aggregate
/// ride along as '#' comment lines so plain readers see exactly the data rows.
/// Kinds with a declared schema (coupling rows, sweep curves) emit exactly
/// those columns; the rest prefix the bookkeeping columns.
inline void write_csv(const ExperimentResult& result, std::ostream& out) {
  const auto fields = detail::csv_field_order(result.spec.kind);
  out << detail::config_comment(result.spec) << "\n";
  const bool sweep = result.spec.kind == ExperimentKind::critical_sweep ||
                     result.spec.kind == ExperimentKind::min_anchors;
  if (sweep) {
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
    out << "\n";
    for (const auto& rec : result.records) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        out << (i ? "," : "") << fmt_g(rec.field(fields[i]));
      }
      out << "\n";
    }
  } else if (result.spec.kind == ExperimentKind::coupling) {
    out << "seed";
    for (const auto& f : fields) out << "," << f;
    out << "\n";
    for (const auto& rec : result.records) {
      out << rec.seed;
      for (const auto& f : fields) out << "," << fmt_g(rec.field(f));
      out << "\n";
    }
  } else {
    out << "trial,seed,success,resamples";
    for (const auto& f : fields) out << "," << f;
    out << "\n";
    for (const auto& rec : result.records) {
      out << rec.trial << "," << rec.seed << "," << (rec.success ? 1 : 0) << "," << rec.resamples;
      for (const auto& f : fields) out << "," << fmt_g(rec.field(f));
      out << "\n";
    }
  }
  out << "# aggregate: successes=" << result.aggregate.successes
      << " trials=" << result.aggregate.trials << " fraction=" << fmt_g(result.aggregate.fraction)
      << " wilson_low=" << fmt_g(result.aggregate.wilson_low)
      << " wilson_high=" << fmt_g(result.aggregate.wilson_high) << "\n";
  for (const auto& [k, v] : result.summary) out << "# " << k << "=" << fmt_g(v) << "\n";
}

enum class OutputFormat { csv, json };

inline void write_results(const ExperimentResult& result, OutputFormat format,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_results: cannot open '" + path + "' for writing");
  if (format == OutputFormat::csv) {
    write_csv(result, out);
  } else {
    out << to_json(result).dump(2) << "\n";
  }
  out.flush();
  if (!out) throw std::runtime_error("write_results: write to '" + path + "' failed");
}

}  // namespace percoloc
