// Config parsing, experiment tabulation and the command-line front end.

#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "iddm/errors.hpp"
#include "iddm/experiment.hpp"

using namespace iddm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("iddm_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(IDDM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(st));
  return WEXITSTATUS(st);
}

ExperimentConfig cfg_of(const ConfigMap& m) { return ExperimentConfig::from_map(m); }

}  // namespace

TEST_CASE("config text parsing") {
  const auto m = parse_config_text("# header\n\nproblem.n = 20\n  seed=7  # trailing\nout_dir=a=b\n");
  CHECK(m.size() == 3);
  CHECK(m.at("problem.n") == "20");
  CHECK(m.at("seed") == "7");
  CHECK(m.at("out_dir") == "a=b");

  CHECK_THROWS_AS(parse_config_text("seed=1\njunk line\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("=3\n"), ConfigError);
  try {
    parse_config_text("a=1\nb=2\nbroken\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(read_config_file("/nonexistent/iddm.cfg"), ConfigError);
}

TEST_CASE("config map to experiment settings") {
  const auto c = cfg_of({{"problem.n", "10:30:10"}, {"sde.alpha", "0.25"}, {"algo.kind", "iddm"}, {"reps", "3"}});
  CHECK(c.ns == std::vector<int>{10, 20, 30});
  REQUIRE(c.sde_alpha.has_value());
  CHECK(*c.sde_alpha == 0.25);
  CHECK(c.algorithms == std::vector<std::string>{"iddm"});
  CHECK(c.reps == 3);
  CHECK(c.echo.size() == 4);
  CHECK(cfg_of({{"problem.n", "5,7"}}).ns == std::vector<int>{5, 7});

  CHECK_THROWS_AS(cfg_of({{"problem.nn", "3"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"problem.n", "ten"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"problem.n", "30:10:10"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"problem.n", "1"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"problem.family", "tsp"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"problem.family", "biquad"}, {"problem.case", "II"}, {"problem.eta", "1"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"problem.family", "stability"}, {"problem.graph", "wheel:5"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"algo.kind", "eigs-local"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"algo.cycles", "0"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"sde.dt", "-0.1"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"sde.alpha", "-1"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"sde.schedule", "linear"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"seed", "-4"}}), ConfigError);
  CHECK_THROWS_AS(cfg_of({{"algo.keep_incumbent_start", "maybe"}}), ConfigError);
}

TEST_CASE("summary rows are recomputable from the per-run records") {
  const auto cfg = cfg_of({{"problem.n", "10,12"}, {"reps", "6"}, {"seed", "11"}, {"algo.cycles", "3"}});
  const auto t = run_experiment(cfg);
  REQUIRE(t.rows.size() == 4);
  REQUIRE(t.runs.size() == 24);
  for (const auto& row : t.rows) {
    double lo = INFINITY, hi = -INFINITY, sum = 0.0;
    int count = 0;
    for (const auto& r : t.runs) {
      if (r.n != row.n || r.algorithm != row.algorithm) continue;
      CHECK(r.seed == 11 + static_cast<std::uint64_t>(r.rep));
      lo = std::min(lo, r.best_objective);
      hi = std::max(hi, r.best_objective);
      sum += r.best_objective;
      ++count;
    }
    CHECK(count == 6);
    CHECK(row.reps == 6);
    CHECK(row.min == lo);
    CHECK(row.max == hi);
    CHECK(row.mean == doctest::Approx(sum / count).epsilon(1e-14));
    CHECK(row.min <= row.mean);
    CHECK(row.mean <= row.max);
  }
  // matched seeds: both algorithms start from the same point
  for (const auto& a : t.runs)
    for (const auto& b : t.runs)
      if (a.n == b.n && a.rep == b.rep) CHECK(a.initial_objective == b.initial_objective);
}

TEST_CASE("runs.csv is byte-identical across runs and thread counts") {
  auto cfg = cfg_of({{"problem.n", "8"}, {"reps", "4"}, {"seed", "5"}, {"algo.cycles", "3"}});
  const auto d1 = scratch("det1"), d2 = scratch("det2");
  cfg.threads = 1;
  write_results(run_experiment(cfg), cfg, d1.string());
  cfg.threads = 3;
  write_results(run_experiment(cfg), cfg, d2.string());
  const auto a = slurp(d1 / "runs.csv");
  CHECK(!a.empty());
  CHECK(a == slurp(d2 / "runs.csv"));

  const auto j = nlohmann::json::parse(slurp(d1 / "results.json"));
  CHECK(j.at("family") == "hp1");
  CHECK(j.at("runs").size() == 8);
  CHECK(j.at("summary").size() == 2);
  CHECK(j.at("config").at("problem.n") == "8");
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("stability number of the 5-cycle is found in every run") {
  const auto cfg = cfg_of({{"problem.family", "stability"}, {"problem.graph", "cycle:5"}, {"reps", "10"}});
  const auto t = run_experiment(cfg);
  REQUIRE(t.runs.size() == 20);
  for (const auto& r : t.runs) {
    CHECK(r.metric == 2.0);
    CHECK(r.best_objective == doctest::Approx(0.5).epsilon(1e-8));
  }
}

TEST_CASE("sigma sweep on hp1 n=40") {
  const auto cfg = cfg_of({{"problem.n", "40"}, {"reps", "20"}, {"seed", "1000"}});
  const std::vector<double> grid = {0.0, 0.01, 0.02, 0.03, 0.05};
  const auto s = sweep_sigma(cfg, grid);
  REQUIRE(s.value.rows() == 1);
  REQUIRE(s.value.cols() == 5);
  double best = -INFINITY;
  for (int j = 0; j < 5; ++j) {
    CHECK(std::isfinite(s.value(0, j)));
    best = std::max(best, s.value(0, j));
  }
  CHECK(std::abs(s.value(0, 0)) <= 0.3);
  CHECK(best > 0.0);

  const auto d = scratch("sweep");
  write_sweep(s, d.string());
  std::istringstream csv(slurp(d / "sweep_sigma.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 6);  // header + one line per sigma
  fs::remove_all(d);
}

TEST_CASE("IDDM beats RSlocal on most hp1 sizes from 10 to 200") {
  const auto cfg = cfg_of({{"problem.n", "10:200:10"}, {"reps", "50"}, {"seed", "1000"}});
  const auto t = run_experiment(cfg);
  REQUIRE(t.rows.size() == 40);
  int wins = 0;
  for (int n = 20; n <= 200; n += 10) {
    double fi = NAN, fr = NAN;
    for (const auto& row : t.rows) {
      if (row.n != n) continue;
      (row.algorithm == "iddm" ? fi : fr) = row.mean;
    }
    if (fi <= fr) ++wins;
  }
  MESSAGE("IDDM mean <= RSlocal mean in " << wins << " of 19 sizes");
  CHECK(wins >= 16);
}

TEST_CASE("command-line exit codes and outputs") {
  const auto d = scratch("run");
  const std::string run = "run --set problem.n=6 --set algo.cycles=2 --reps 2 --seed 3 --out ";
  CHECK(cli(run + d.string()) == 0);
  CHECK(fs::exists(d / "runs.csv"));
  CHECK(fs::exists(d / "summary.csv"));
  CHECK(fs::exists(d / "results.json"));
  const auto first = slurp(d / "runs.csv");
  CHECK(cli(run + d.string()) == 0);
  CHECK(first == slurp(d / "runs.csv"));

  const fs::path cfgfile = d / "exp.cfg";
  {
    std::ofstream f(cfgfile);
    f << "# stability run\nproblem.family=stability\nproblem.graph=petersen\nreps=1\n";
  }
  CHECK(cli("run -c " + cfgfile.string() + " --out " + (d / "st").string()) == 0);
  CHECK(cli("run -c " + cfgfile.string() + " --set problem.bogus=1 --out " + d.string()) == 2);
  CHECK(cli("run --set problem.n=abc --out " + d.string()) == 2);
  CHECK(cli("run --set problem.n --out " + d.string()) == 2);
  CHECK(cli("run -c /nonexistent/x.cfg") == 2);
  CHECK(cli("run --no-such-flag") == 2);
  CHECK(cli("") == 2);
  CHECK(cli("run --set problem.n=4 --reps 1 --out /dev/null/sub") == 1);

  CHECK(cli("sweep-sigma --set problem.n=6 --reps 2 --sigmas 0,0.1 --out " + (d / "sw").string()) == 0);
  CHECK(fs::exists(d / "sw" / "sweep_sigma.csv"));
  CHECK(cli("sweep-sigma --set problem.n=6 --sigmas 0,x --out " + d.string()) == 2);

  CHECK(cli("graph-gen --kind petersen --out " + (d / "p.col").string()) == 0);
  CHECK(slurp(d / "p.col").find("p edge 10 15") != std::string::npos);
  CHECK(cli("graph-gen --kind wheel:4") == 2);
  CHECK(cli("cryoem-gen --N 6 --corruption 0.2 --out " + (d / "c.txt").string()) == 0);
  CHECK(fs::file_size(d / "c.txt") > 0);
  CHECK(cli("cryoem-gen --N 6 --corruption 1.5") == 2);

  CHECK(cli("verify --reps 2") == 2);
  CHECK(cli("verify --budget huge") == 2);
  fs::remove_all(d);
}

TEST_CASE("verify subcommand reports injected faults" * doctest::timeout(600)) {
  const auto d = scratch("verify");
  fs::create_directories(d);
  CHECK(cli("verify --budget quick --out " + d.string()) == 0);
  const auto j = nlohmann::json::parse(slurp(d / "verify.json"));
  CHECK(j.contains("checks"));
  CHECK(cli("verify --budget quick --flip-drift-sign --out " + d.string()) == 3);
  fs::remove_all(d);
}
