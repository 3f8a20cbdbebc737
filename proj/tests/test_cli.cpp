#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "percoloc/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int exit_code{};
  std::string out;
  std::string err;
};

CliRun run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = percoloc::cli::run(args, out, err);
  return CliRun{code, out.str(), err.str()};
}

std::string data_path(const std::string& name) {
  return std::string(PERCOLOC_TEST_DATA_DIR) + "/" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("percoloc_test_" + name);
}

}  // namespace

TEST_CASE("sufficient-m prints the anchor count with its q/threshold pair") {
  auto res = run_cli({"sufficient-m", "--n", "1e6", "--c-radius", "2", "--c-prime", "1", "--rho",
                      "paper_r"});
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("m=2269\n") != std::string::npos);
  REQUIRE(res.out.find("q_at_m=0.178777735442") != std::string::npos);
  REQUIRE(res.out.find("threshold=0.178735503878") != std::string::npos);
}

TEST_CASE("bootstrap runs a text fixture") {
  auto res = run_cli({"bootstrap", "--L", "2", "--rule", "vn4", "--theta", "2", "--fixture",
                      data_path("diag2.txt")});
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("fully_active=true") != std::string::npos);
  REQUIRE(res.out.find("steps=1") != std::string::npos);
  // disagreeing --L is a validation error
  auto bad = run_cli({"bootstrap", "--L", "3", "--fixture", data_path("diag2.txt")});
  REQUIRE(bad.exit_code == 1);
}

TEST_CASE("occupancy evaluates the closed form") {
  auto res = run_cli({"occupancy", "--n", "100", "--r", "0.2", "--tau", "0.06"});
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("p_all_occupied=3.4549769525e-09") != std::string::npos);
}

TEST_CASE("scaling emits the table and fitted slopes") {
  auto res = run_cli({"scaling", "--n", "1e4,1e5,1e6,1e7,1e8", "--c-radius", "4,8,16",
                      "--c-prime", "1"});
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("n,c_radius,r,threshold,m_sufficient,feasible") != std::string::npos);
  REQUIRE(res.out.find("# slope c_radius=4: 0.8183961846") != std::string::npos);
  REQUIRE(res.out.find("# slope c_radius=16: 0.7935569200") != std::string::npos);
}

TEST_CASE("gen output is reproducible per seed") {
  const std::vector<std::string> args{"gen", "--n", "50", "--seed", "9"};
  auto a = run_cli(args);
  auto b = run_cli(args);
  REQUIRE(a.exit_code == 0);
  REQUIRE(a.out == b.out);
  auto c = run_cli({"gen", "--n", "50", "--seed", "10"});
  REQUIRE(c.out != a.out);
}

TEST_CASE("localize replays a stored node set") {
  const auto fixture = temp_file("nodes.json");
  auto gen = run_cli({"gen", "--n", "200", "--seed", "4", "--out", fixture.string()});
  REQUIRE(gen.exit_code == 0);
  auto res = run_cli({"localize", "--nodes", fixture.string(), "--m", "40", "--r", "0.2",
                      "--seed", "1"});
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("\"n_realized\"") != std::string::npos);
  REQUIRE(res.out.find("\"fully_localized\"") != std::string::npos);
  const auto trace = temp_file("trace.csv");
  auto traced = run_cli({"localize", "--nodes", fixture.string(), "--m", "40", "--r", "0.2",
                         "--seed", "1", "--trace", trace.string()});
  REQUIRE(traced.exit_code == 0);
  REQUIRE(slurp(trace.string()).rfind("round,newly_localized_count\n", 0) == 0);
  fs::remove(fixture);
  fs::remove(trace);
}

TEST_CASE("worker budget leaves command output byte-identical") {
  const std::vector<std::string> base{"coupling", "--n",     "500", "--r",    "0.2",
                                      "--m",      "60",      "--trials", "10", "--seed", "3"};
  auto one = base, eight = base;
  one.insert(one.end(), {"--workers", "1"});
  eight.insert(eight.end(), {"--workers", "8"});
  auto a = run_cli(one);
  auto b = run_cli(eight);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  REQUIRE(a.out == b.out);  // csv output carries no timing
}

TEST_CASE("min-anchors reports the bisection summary") {
  auto res = run_cli({"min-anchors", "--n", "20", "--r", "0.75", "--target", "0.9", "--trials",
                      "50", "--seed", "2", "--workers", "2"});
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("# m_hat=3") != std::string::npos);
  REQUIRE(res.out.find("# achievable=1") != std::string::npos);
}

TEST_CASE("config files feed flags, and explicit flags win") {
  const auto cfg = temp_file("occ.cfg");
  {
    std::ofstream f(cfg);
    f << "n=100\nr=0.2\ntau=0.06\n";
  }
  auto from_file = run_cli({"occupancy", "--config", cfg.string()});
  auto from_flags = run_cli({"occupancy", "--n", "100", "--r", "0.2", "--tau", "0.06"});
  REQUIRE(from_file.exit_code == 0);
  REQUIRE(from_file.out == from_flags.out);
  auto overridden = run_cli({"occupancy", "--config", cfg.string(), "--tau", "0.05"});
  REQUIRE(overridden.exit_code == 0);
  REQUIRE(overridden.out != from_file.out);
  fs::remove(cfg);
}

TEST_CASE("usage errors exit 1 with a message on the error stream") {
  auto unknown_flag = run_cli({"occupancy", "--n", "10", "--r", "0.2", "--tau", "0.01",
                               "--frobnicate"});
  REQUIRE(unknown_flag.exit_code == 1);
  REQUIRE_FALSE(unknown_flag.err.empty());

  auto unknown_sub = run_cli({"transmogrify"});
  REQUIRE(unknown_sub.exit_code == 1);
  REQUIRE_FALSE(unknown_sub.err.empty());

  auto missing = run_cli({"occupancy"});
  REQUIRE(missing.exit_code == 1);

  auto invalid_value = run_cli({"occupancy", "--n", "-3", "--r", "0.2", "--tau", "0.01"});
  REQUIRE(invalid_value.exit_code == 1);
  REQUIRE(invalid_value.err.find("error") != std::string::npos);

  auto none = run_cli({});
  REQUIRE(none.exit_code == 1);
}

TEST_CASE("help text is stable for every subcommand") {
  const std::vector<std::pair<std::string, std::vector<std::string>>> cases{
      {"main", {"--help"}},
      {"gen", {"gen", "--help"}},
      {"localize", {"localize", "--help"}},
      {"bootstrap", {"bootstrap", "--help"}},
      {"critical", {"critical", "--help"}},
      {"coupling", {"coupling", "--help"}},
      {"min-anchors", {"min-anchors", "--help"}},
      {"sufficient-m", {"sufficient-m", "--help"}},
      {"scaling", {"scaling", "--help"}},
      {"occupancy", {"occupancy", "--help"}},
  };
  for (const auto& [name, args] : cases) {
    INFO("subcommand: " << name);
    auto res = run_cli(args);
    REQUIRE(res.exit_code == 0);
    REQUIRE(res.out == slurp(data_path("help/" + name + ".txt")));
  }
}
