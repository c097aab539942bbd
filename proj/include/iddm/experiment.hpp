#pragma once

// Repeated seeded benchmark runs and their tabulation.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iddm/driver.hpp"
#include "iddm/local_solver.hpp"
#include "iddm/problem.hpp"

namespace iddm {

using ConfigMap = std::map<std::string, std::string>;

/// Parses flat `key=value` lines; `#` starts a comment, blank lines are
/// skipped. Throws ConfigError (with the line number) on malformed lines.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::string& path);

struct ExperimentConfig {
  std::string family = "hp1";          // hp1 | biquad | stability | cryoem
  std::vector<int> ns = {10};          // problem.n; a list gives one table row group per n
  std::string biquad_case = "I";       // I | II
  double eta = 0.5;
  std::string graph = "cycle:5";
  int cryo_N = 20;
  double corruption = 0.0;
  /// Seed of the instance data (tensors, cryo-EM data). Unset: each repetition
  /// draws its own instance from its own seed.
  std::optional<std::uint64_t> data_seed;

  std::vector<std::string> algorithms = {"iddm", "rslocal"};  // iddm | rslocal | local | eigs-local
  int cycles = 10;
  int trials = 10;

  std::optional<double> sde_alpha;     // defaults to 1/n
  double sde_dt = 0.1;
  long long sde_steps = 100;
  std::string schedule = "power";      // power | cdd | constant
  std::optional<int> n_eff;            // defaults to the largest block row count
  bool keep_incumbent_start = true;
  bool initial_local_solve = true;

  LocalSolverConfig local;

  std::uint64_t seed = 1;
  int reps = 1;
  std::string out_dir = "out";
  int threads = 0;                     // 0 = hardware concurrency

  /// Every key accepted by from_map, in the form it was given.
  ConfigMap echo;

  /// Throws ConfigError on unknown keys or invalid values.
  static ExperimentConfig from_map(const ConfigMap& m);
  void validate() const;
};

/// Keys understood by ExperimentConfig::from_map.
const std::vector<std::string>& config_keys();

struct RepRecord {
  int n = 0;
  std::string algorithm;
  int rep = 0;
  std::uint64_t seed = 0;
  double best_objective = 0.0;
  double initial_objective = 0.0;
  /// Stability estimate for graphs, Procrustes MSE for cryo-EM, NaN otherwise.
  double metric = 0.0;
  double wall_seconds = 0.0;
  int diverged_cycles = 0;
};

struct ResultRow {
  int n = 0;
  std::string algorithm;
  int reps = 0;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  double metric_mean = 0.0;
  double cpu_seconds = 0.0;  // mean wall time per repetition
};

struct ResultsTable {
  std::string family;
  std::vector<ResultRow> rows;
  std::vector<RepRecord> runs;  // sorted by (n, algorithm order, rep)
};

/// Builds the problem for one repetition. Instance data (tensors, cryo-EM
/// data) is drawn from the repetition's seed so all algorithms share it.
struct RepProblem {
  Problem problem;
  std::optional<ProductPoint> warm_start;  // eigs initializer for cryo-EM
  std::function<double(const ProductPoint&, double)> metric;
};
RepProblem make_rep_problem(const ExperimentConfig& cfg, int n, std::uint64_t rep_seed);

/// One repetition of one algorithm. Matched seeds: IDDM's start point is
/// RSlocal's first trial point.
RepRecord run_one(const ExperimentConfig& cfg, int n, const std::string& algorithm, int rep);

/// Runs every (n, algorithm, rep) with seeds seed + rep, in a worker pool.
ResultsTable run_experiment(const ExperimentConfig& cfg);

/// Writes runs.csv (no timings, reproducible byte for byte), summary.csv and results.json into dir.
void write_results(const ResultsTable& table, const ExperimentConfig& cfg, const std::string& dir);

struct SigmaSweep {
  std::vector<int> ns;
  std::vector<double> sigmas;
  /// value(i, j) = -log10(mean F_IDDM(n_i, sigma_j) / mean F_RSlocal(n_i)).
  Matrix value;
  Matrix iddm_mean;
  /// RSlocal reference mean used for each cell.
  Matrix rslocal_mean;
};

/// sigma is the initial diffusion strength alpha. At sigma = 0 the RSlocal
/// reference uses a single trial, the restart budget IDDM has without noise.
SigmaSweep sweep_sigma(const ExperimentConfig& cfg, const std::vector<double>& sigma_grid);
void write_sweep(const SigmaSweep& sweep, const std::string& dir);

}  // namespace iddm
