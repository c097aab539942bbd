// Command-line front end: experiment runs, sigma sweeps, the verification
// suite and instance generators.
//
// Exit codes: 0 success, 1 run failure, 2 configuration error, 3 verification failure.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iddm/cryoem.hpp"
#include "iddm/errors.hpp"
#include "iddm/experiment.hpp"
#include "iddm/format.hpp"
#include "iddm/graph.hpp"
#include "iddm/verify.hpp"

namespace {

constexpr int kExitRunFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVerify = 3;

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> sets;
  long long seed = -1;
  int reps = -1;
  std::string out;
  int threads = -1;
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("-c,--config", o.config_file, "key=value config file");
  sub->add_option("--set", o.sets, "override, e.g. --set problem.n=20 (repeatable)");
  sub->add_option("--seed", o.seed, "base seed; repetition r uses seed + r");
  sub->add_option("--reps", o.reps, "number of repetitions");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--threads", o.threads, "worker threads (0 = all cores)");
}

iddm::ExperimentConfig build_config(const CommonOpts& o) {
  iddm::ConfigMap m;
  if (!o.config_file.empty()) m = iddm::read_config_file(o.config_file);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw iddm::ConfigError("--set expects key=value, got '" + s + "'");
    m[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (o.seed >= 0) m["seed"] = std::to_string(o.seed);
  if (o.reps >= 0) m["reps"] = std::to_string(o.reps);
  if (!o.out.empty()) m["out_dir"] = o.out;
  if (o.threads >= 0) m["threads"] = std::to_string(o.threads);
  return iddm::ExperimentConfig::from_map(m);
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw iddm::ConfigError("bad sigma value '" + item + "'");
    }
  }
  return out;
}

int cmd_run(const CommonOpts& o) {
  const auto cfg = build_config(o);
  const auto table = iddm::run_experiment(cfg);
  iddm::write_results(table, cfg, cfg.out_dir);
  std::cout << "family,n,algorithm,reps,min,mean,max,metric_mean,cpu_seconds\n";
  for (const auto& r : table.rows) {
    std::cout << table.family << "," << r.n << "," << r.algorithm << "," << r.reps << ","
              << iddm::format_double(r.min) << "," << iddm::format_double(r.mean) << ","
              << iddm::format_double(r.max) << "," << iddm::format_double(r.metric_mean) << ","
              << iddm::format_double(r.cpu_seconds) << "\n";
  }
  return 0;
}

int cmd_sweep(const CommonOpts& o, const std::string& grid) {
  const auto cfg = build_config(o);
  const auto sweep = iddm::sweep_sigma(cfg, parse_grid(grid));
  iddm::write_sweep(sweep, cfg.out_dir);
  std::ifstream in(std::filesystem::path(cfg.out_dir) / "sweep_sigma.csv");
  std::cout << in.rdbuf();
  return 0;
}

int cmd_verify(const std::string& budget, long long seed, const std::string& out, bool flip) {
  iddm::VerifyBudget b;
  if (budget == "quick") b = iddm::VerifyBudget::Quick;
  else if (budget == "full") b = iddm::VerifyBudget::Full;
  else throw iddm::ConfigError("--budget must be quick or full");
  iddm::VerifyHooks hooks;
  hooks.flip_drift_sign = flip;
  const auto rep = iddm::verify_all(b, static_cast<std::uint64_t>(seed < 0 ? 1 : seed), hooks);
  const std::string json = rep.to_json();
  if (out.empty() || out == "-") {
    std::cout << json << "\n";
  } else {
    std::filesystem::path p(out);
    if (std::filesystem::is_directory(p)) p /= "verify.json";
    std::ofstream f(p);
    f << json << "\n";
    if (!f) throw std::runtime_error("cannot write " + p.string());
    for (const auto& c : rep.checks) std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "\n";
  }
  return rep.all_passed() ? 0 : kExitVerify;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + out);
}

int cmd_graph(const std::string& kind, const std::string& out) {
  const auto g = iddm::graph_from_spec(kind);
  std::ostringstream os;
  iddm::write_dimacs(os, g, kind);
  emit(out, os.str());
  return 0;
}

int cmd_cryoem(int N, double p, long long seed, const std::string& out) {
  if (N < 2) throw iddm::ConfigError("--N must be >= 2");
  if (!(p >= 0.0 && p <= 1.0)) throw iddm::ConfigError("--corruption must lie in [0, 1]");
  iddm::RngStream rng(static_cast<std::uint64_t>(seed < 0 ? 1 : seed), {}, iddm::StreamPurpose::ProblemData);
  const auto inst = iddm::cryoem_generate(N, p, rng);
  std::ostringstream os;
  iddm::write_cryoem(os, inst);
  emit(out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intermittent diminishing diffusion on Stiefel manifolds"};
  app.require_subcommand(1);

  CommonOpts run_opts;
  auto* run = app.add_subcommand("run", "run an experiment and write runs.csv, summary.csv, results.json");
  add_common(run, run_opts);

  CommonOpts sweep_opts;
  std::string grid = "0,1e-3,1e-2,2e-2,3e-2,5e-2,1e-1,1";
  auto* sweep = app.add_subcommand("sweep-sigma", "-log10(F_IDDM / F_RSlocal) over n and the initial sigma");
  add_common(sweep, sweep_opts);
  sweep->add_option("--sigmas", grid, "comma-separated initial diffusion strengths");

  std::string budget = "quick";
  long long vseed = 1;
  std::string vout;
  bool flip = false;
  int vreps = 1;
  auto* verify = app.add_subcommand("verify", "run the verification suite");
  verify->add_option("--budget", budget, "quick or full");
  verify->add_option("--seed", vseed, "seed");
  verify->add_option("--reps", vreps, "accepted for symmetry with other subcommands; must be 1");
  verify->add_option("--out", vout, "JSON report path or directory (stdout if omitted)");
  verify->add_flag("--flip-drift-sign", flip, "fault injection: negate sampled increments")->group("");

  std::string gkind;
  std::string gout;
  long long gseed = 1;
  auto* graph = app.add_subcommand("graph-gen", "write a DIMACS graph");
  graph->add_option("--kind", gkind, "cycle:M, complete:M, empty:M, petersen, hamming:D:T")->required();
  graph->add_option("--out", gout, "output file (stdout if omitted)");
  graph->add_option("--seed", gseed, "unused; generators are deterministic");

  int cN = 20;
  double cp = 0.0;
  long long cseed = 1;
  std::string cout_path;
  auto* cryo = app.add_subcommand("cryoem-gen", "write a synthetic common-lines instance");
  cryo->add_option("--N", cN, "number of images");
  cryo->add_option("--corruption", cp, "probability of replacing a pair of common lines");
  cryo->add_option("--seed", cseed, "seed");
  cryo->add_option("--out", cout_path, "output file (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*sweep) return cmd_sweep(sweep_opts, grid);
    if (*verify) {
      if (vreps != 1) throw iddm::ConfigError("verify: --reps must be 1");
      return cmd_verify(budget, vseed, vout, flip);
    }
    if (*graph) return cmd_graph(gkind, gout);
    if (*cryo) return cmd_cryoem(cN, cp, cseed, cout_path);
  } catch (const iddm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const iddm::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRunFailure;
  }
  return 0;
}
