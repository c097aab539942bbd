#include "iddm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "iddm/cryoem.hpp"
#include "iddm/errors.hpp"
#include "iddm/format.hpp"
#include "iddm/graph.hpp"
#include "iddm/problems.hpp"

namespace iddm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + v + "'");
}

/// "10,20,30" or "10:200:10" (inclusive range with step).
std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  const auto colon = split(v, ':');
  if (colon.size() == 3) {
    const long long a = to_int(key, colon[0]), b = to_int(key, colon[1]), s = to_int(key, colon[2]);
    if (s <= 0 || b < a) throw ConfigError("'" + key + "': bad range '" + v + "'");
    for (long long x = a; x <= b; x += s) out.push_back(static_cast<int>(x));
    return out;
  }
  for (const auto& item : split(v, ',')) out.push_back(static_cast<int>(to_int(key, item)));
  if (out.empty()) throw ConfigError("'" + key + "': empty list");
  return out;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    m[key] = trim(line.substr(eq + 1));
  }
  return m;
}

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "problem.family", "problem.n",     "problem.case",   "problem.eta",   "problem.graph",
      "problem.N",      "problem.corruption", "problem.data_seed", "algo.kind", "algo.cycles",   "algo.trials",
      "algo.keep_incumbent_start", "algo.initial_local_solve", "sde.alpha", "sde.dt", "sde.steps",
      "sde.schedule",   "sde.n_eff",     "local.grad_tol", "local.max_iters", "seed",
      "reps",           "out_dir",       "threads"};
  return keys;
}

ExperimentConfig ExperimentConfig::from_map(const ConfigMap& m) {
  ExperimentConfig c;
  const auto& keys = config_keys();
  for (const auto& [k, v] : m) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError("unknown config key '" + k + "'");
    if (k == "problem.family") c.family = v;
    else if (k == "problem.n") c.ns = to_int_list(k, v);
    else if (k == "problem.case") c.biquad_case = v;
    else if (k == "problem.eta") c.eta = to_double(k, v);
    else if (k == "problem.graph") c.graph = v;
    else if (k == "problem.N") c.cryo_N = static_cast<int>(to_int(k, v));
    else if (k == "problem.corruption") c.corruption = to_double(k, v);
    else if (k == "problem.data_seed") {
      const long long s = to_int(k, v);
      if (s < 0) throw ConfigError("'problem.data_seed' must be non-negative");
      c.data_seed = static_cast<std::uint64_t>(s);
    }
    else if (k == "algo.kind") c.algorithms = split(v, ',');
    else if (k == "algo.cycles") c.cycles = static_cast<int>(to_int(k, v));
    else if (k == "algo.trials") c.trials = static_cast<int>(to_int(k, v));
    else if (k == "algo.keep_incumbent_start") c.keep_incumbent_start = to_bool(k, v);
    else if (k == "algo.initial_local_solve") c.initial_local_solve = to_bool(k, v);
    else if (k == "sde.alpha") c.sde_alpha = to_double(k, v);
    else if (k == "sde.dt") c.sde_dt = to_double(k, v);
    else if (k == "sde.steps") c.sde_steps = to_int(k, v);
    else if (k == "sde.schedule") c.schedule = v;
    else if (k == "sde.n_eff") c.n_eff = static_cast<int>(to_int(k, v));
    else if (k == "local.grad_tol") c.local.grad_tol = to_double(k, v);
    else if (k == "local.max_iters") c.local.max_iters = static_cast<int>(to_int(k, v));
    else if (k == "seed") {
      const long long s = to_int(k, v);
      if (s < 0) throw ConfigError("'seed' must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (k == "reps") c.reps = static_cast<int>(to_int(k, v));
    else if (k == "out_dir") c.out_dir = v;
    else if (k == "threads") c.threads = static_cast<int>(to_int(k, v));
  }
  c.echo = m;
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> families = {"hp1", "biquad", "stability", "cryoem"};
  if (std::find(families.begin(), families.end(), family) == families.end()) {
    throw ConfigError("unknown problem family '" + family + "' (expected hp1, biquad, stability or cryoem)");
  }
  if (family == "hp1" || family == "biquad") {
    for (int n : ns)
      if (n < 2) throw ConfigError("problem.n must be >= 2");
  }
  if (family == "biquad") {
    if (biquad_case != "I" && biquad_case != "II") throw ConfigError("problem.case must be I or II");
    if (biquad_case == "II" && !(eta > 0.0 && eta < 1.0)) throw ConfigError("problem.eta must lie in (0, 1)");
  }
  if (family == "stability") (void)graph_from_spec(graph);
  if (family == "cryoem") {
    if (cryo_N < 3) throw ConfigError("problem.N must be >= 3");
    if (!(corruption >= 0.0 && corruption <= 1.0)) throw ConfigError("problem.corruption must lie in [0, 1]");
  }
  if (algorithms.empty()) throw ConfigError("algo.kind is empty");
  for (const auto& a : algorithms) {
    if (a != "iddm" && a != "rslocal" && a != "local" && a != "eigs-local") {
      throw ConfigError("unknown algorithm '" + a + "' (expected iddm, rslocal, local or eigs-local)");
    }
    if (a == "eigs-local" && family != "cryoem") throw ConfigError("eigs-local needs problem.family=cryoem");
  }
  if (cycles < 1) throw ConfigError("algo.cycles must be >= 1");
  if (trials < 1) throw ConfigError("algo.trials must be >= 1");
  if (sde_alpha && !(*sde_alpha >= 0.0)) throw ConfigError("sde.alpha must be >= 0");
  if (!(sde_dt > 0.0)) throw ConfigError("sde.dt must be > 0");
  if (sde_steps < 0) throw ConfigError("sde.steps must be >= 0");
  if (schedule != "power" && schedule != "cdd" && schedule != "constant") {
    throw ConfigError("sde.schedule must be power, cdd or constant");
  }
  if (n_eff && *n_eff < 2) throw ConfigError("sde.n_eff must be >= 2");
  if (reps < 1) throw ConfigError("reps must be >= 1");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  local.validate();
}

RepProblem make_rep_problem(const ExperimentConfig& cfg, int n, std::uint64_t rep_seed) {
  RngStream data(cfg.data_seed.value_or(rep_seed), {static_cast<std::uint64_t>(n), 0, 0}, StreamPurpose::ProblemData);
  RepProblem rp;
  rp.metric = [](const ProductPoint&, double) { return std::numeric_limits<double>::quiet_NaN(); };
  if (cfg.family == "hp1") {
    rp.problem = hp1_problem(n);
  } else if (cfg.family == "biquad") {
    rp.problem = biquad_problem(biquad_make(n, cfg.biquad_case == "I" ? BiquadCase::I : BiquadCase::II, cfg.eta, data));
  } else if (cfg.family == "stability") {
    rp.problem = stability_problem(graph_from_spec(cfg.graph));
    rp.metric = [](const ProductPoint&, double f) { return static_cast<double>(stability_estimate(f)); };
  } else {
    auto inst = std::make_shared<CryoEmInstance>(cryoem_generate(cfg.cryo_N, cfg.corruption, data));
    rp.problem = cryoem_problem(*inst);
    try {
      rp.warm_start = eigs_init(*inst);
    } catch (const InitializationError&) {
      rp.warm_start.reset();
    }
    rp.metric = [inst](const ProductPoint& X, double) {
      return procrustes_mse_any_handedness(complete_rotations(X), inst->true_rotations);
    };
  }
  return rp;
}

namespace {

int block_rows(const Problem& P) {
  int n = 0;
  for (const auto& d : P.block_dims) n = std::max(n, d.n);
  return n;
}

IddmConfig iddm_config(const ExperimentConfig& cfg, const Problem& P, int n) {
  IddmConfig ic;
  ic.num_cycles = cfg.cycles;
  ic.local = cfg.local;
  ic.keep_incumbent_start = cfg.keep_incumbent_start;
  ic.initial_local_solve = cfg.initial_local_solve;
  ic.sde.dt = cfg.sde_dt;
  ic.sde.num_steps = cfg.sde_steps;
  ic.sde.record_stride = 0;
  const double alpha = cfg.sde_alpha.value_or(1.0 / static_cast<double>(n));
  const int n_eff = cfg.n_eff.value_or(std::max(2, block_rows(P)));
  if (cfg.schedule == "power") ic.sde.schedule = DiffusionSchedule::power_law(alpha, cfg.sde_dt, n_eff);
  else if (cfg.schedule == "cdd") ic.sde.schedule = DiffusionSchedule::cdd(alpha, cfg.sde_dt);
  else ic.sde.schedule = DiffusionSchedule::constant(alpha);
  return ic;
}

int size_parameter(const ExperimentConfig& cfg, int n) {
  if (cfg.family == "stability") return graph_from_spec(cfg.graph).num_vertices;
  if (cfg.family == "cryoem") return cfg.cryo_N;
  return n;
}

}  // namespace

RepRecord run_one(const ExperimentConfig& cfg, int n, const std::string& algorithm, int rep) {
  const std::uint64_t rep_seed = cfg.seed + static_cast<std::uint64_t>(rep);
  RepProblem rp = make_rep_problem(cfg, n, rep_seed);
  const Problem& P = rp.problem;
  const RngStream init(rep_seed, {static_cast<std::uint64_t>(n), 0, 0}, StreamPurpose::InitialPoint);
  const RngStream noise(rep_seed, {static_cast<std::uint64_t>(n), 0, 0}, StreamPurpose::Diffusion);

  RepRecord rec;
  rec.n = n;
  rec.algorithm = algorithm;
  rec.rep = rep;
  rec.seed = rep_seed;

  auto start_point = [&]() {
    if (rp.warm_start) return *rp.warm_start;
    RngStream r0 = init.with_cycle(0);
    return random_product_point(P.block_dims, r0);
  };

  const auto t0 = std::chrono::steady_clock::now();
  ProductPoint best;
  if (algorithm == "iddm") {
    const RunReport r = iddm_run(P, start_point(), iddm_config(cfg, P, n), noise);
    rec.best_objective = r.best_objective;
    rec.initial_objective = r.initial_objective;
    for (const auto& c : r.cycles) rec.diverged_cycles += c.diverged ? 1 : 0;
    best = r.best_point;
  } else if (algorithm == "rslocal") {
    std::optional<std::vector<ProductPoint>> inits;
    if (rp.warm_start) inits = std::vector<ProductPoint>{*rp.warm_start};
    const RunReport r = rslocal_run(P, cfg.trials, cfg.local, init, inits);
    rec.best_objective = r.best_objective;
    rec.initial_objective = r.initial_objective;
    best = r.best_point;
  } else {
    if (algorithm == "eigs-local" && !rp.warm_start) throw InitializationError("eigs initializer failed");
    const LocalResult r = local_minimize(start_point(), P, cfg.local);
    rec.best_objective = r.objective;
    rec.initial_objective = r.stats.initial_objective;
    best = r.point;
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rec.metric = rp.metric(best, rec.best_objective);
  return rec;
}

ResultsTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  struct Task {
    int n;
    std::size_t algo;
    int rep;
  };
  std::vector<int> ns = cfg.ns;
  if (cfg.family == "stability" || cfg.family == "cryoem") ns = {size_parameter(cfg, 0)};
  std::vector<Task> tasks;
  for (int n : ns)
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a)
      for (int r = 0; r < cfg.reps; ++r) tasks.push_back({n, a, r});

  std::vector<RepRecord> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      {
        std::lock_guard lk(failure_mu);
        if (failure) return;
      }
      try {
        const Task& t = tasks[i];
        results[i] = run_one(cfg, t.n, cfg.algorithms[t.algo], t.rep);
      } catch (...) {
        std::lock_guard lk(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned nthreads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
  nthreads = std::max(1u, std::min<unsigned>(nthreads, static_cast<unsigned>(tasks.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ResultsTable table;
  table.family = cfg.family;
  table.runs = std::move(results);
  for (int n : ns)
    for (const auto& algo : cfg.algorithms) {
      ResultRow row;
      row.n = n;
      row.algorithm = algo;
      row.min = std::numeric_limits<double>::infinity();
      row.max = -std::numeric_limits<double>::infinity();
      double sum = 0.0, msum = 0.0, tsum = 0.0;
      for (const auto& r : table.runs) {
        if (r.n != n || r.algorithm != algo) continue;
        ++row.reps;
        row.min = std::min(row.min, r.best_objective);
        row.max = std::max(row.max, r.best_objective);
        sum += r.best_objective;
        msum += r.metric;
        tsum += r.wall_seconds;
      }
      row.mean = sum / row.reps;
      row.metric_mean = msum / row.reps;
      row.cpu_seconds = tsum / row.reps;
      table.rows.push_back(row);
    }
  return table;
}

void write_results(const ResultsTable& table, const ExperimentConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  {
    std::ofstream out(d / "runs.csv");
    out << "family,n,algorithm,rep,seed,initial_objective,best_objective,metric,diverged_cycles\n";
    for (const auto& r : table.runs) {
      out << table.family << "," << r.n << "," << r.algorithm << "," << r.rep << "," << r.seed << ","
          << format_double(r.initial_objective) << "," << format_double(r.best_objective) << ","
          << format_double(r.metric) << "," << r.diverged_cycles << "\n";
    }
    if (!out) throw std::runtime_error("failed to write runs.csv");
  }
  {
    std::ofstream out(d / "summary.csv");
    out << "family,n,algorithm,reps,min,mean,max,metric_mean,cpu_seconds\n";
    for (const auto& r : table.rows) {
      out << table.family << "," << r.n << "," << r.algorithm << "," << r.reps << "," << format_double(r.min) << ","
          << format_double(r.mean) << "," << format_double(r.max) << "," << format_double(r.metric_mean) << ","
          << format_double(r.cpu_seconds) << "\n";
    }
    if (!out) throw std::runtime_error("failed to write summary.csv");
  }
  {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
    nlohmann::ordered_json j;
    j["family"] = table.family;
    j["config"] = cfg.echo;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : table.rows) {
      rows.push_back({{"n", r.n}, {"algorithm", r.algorithm}, {"reps", r.reps}, {"min", num(r.min)},
                      {"mean", num(r.mean)}, {"max", num(r.max)}, {"metric_mean", num(r.metric_mean)},
                      {"cpu_seconds", r.cpu_seconds}});
    }
    j["summary"] = std::move(rows);
    auto runs = nlohmann::ordered_json::array();
    for (const auto& r : table.runs) {
      runs.push_back({{"n", r.n}, {"algorithm", r.algorithm}, {"rep", r.rep}, {"seed", r.seed},
                      {"initial_objective", num(r.initial_objective)}, {"best_objective", num(r.best_objective)},
                      {"metric", num(r.metric)}, {"wall_seconds", r.wall_seconds},
                      {"diverged_cycles", r.diverged_cycles}});
    }
    j["runs"] = std::move(runs);
    std::ofstream out(d / "results.json");
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed to write results.json");
  }
}

SigmaSweep sweep_sigma(const ExperimentConfig& cfg, const std::vector<double>& sigma_grid) {
  if (sigma_grid.empty()) throw ConfigError("sweep-sigma: empty sigma grid");
  for (double s : sigma_grid)
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("sweep-sigma: sigma values must be finite and >= 0");
  cfg.validate();

  SigmaSweep out;
  out.sigmas = sigma_grid;
  out.ns = cfg.ns;
  if (cfg.family == "stability" || cfg.family == "cryoem") out.ns = {size_parameter(cfg, 0)};
  const auto rows = static_cast<Eigen::Index>(out.ns.size());
  const auto cols = static_cast<Eigen::Index>(sigma_grid.size());
  out.value.resize(rows, cols);
  out.iddm_mean.resize(rows, cols);
  out.rslocal_mean.resize(rows, cols);

  auto mean_of = [](const ResultsTable& t) { return t.rows.front().mean; };
  for (Eigen::Index i = 0; i < rows; ++i) {
    ExperimentConfig base = cfg;
    base.ns = {out.ns[static_cast<std::size_t>(i)]};
    ExperimentConfig rs = base;
    rs.algorithms = {"rslocal"};
    const double rs_mean = mean_of(run_experiment(rs));
    std::optional<double> rs_single;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double sigma = sigma_grid[static_cast<std::size_t>(j)];
      ExperimentConfig ic = base;
      ic.algorithms = {"iddm"};
      ic.sde_alpha = sigma;
      const double fi = mean_of(run_experiment(ic));
      double fr = rs_mean;
      if (sigma == 0.0) {
        if (!rs_single) {
          ExperimentConfig one = rs;
          one.trials = 1;
          rs_single = mean_of(run_experiment(one));
        }
        fr = *rs_single;
      }
      out.iddm_mean(i, j) = fi;
      out.rslocal_mean(i, j) = fr;
      double v = 0.0;
      if (fi > 0.0 && fr > 0.0) v = 0.0 - std::log10(fi / fr);  // equal means give +0, not -0
      else if (fi != fr) v = fi < fr ? 16.0 : -16.0;  // non-positive objectives: report the sign only
      out.value(i, j) = v;
    }
  }
  return out;
}

void write_sweep(const SigmaSweep& sweep, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / "sweep_sigma.csv");
  out << "n,sigma,neg_log10_ratio,iddm_mean,rslocal_mean\n";
  for (std::size_t i = 0; i < sweep.ns.size(); ++i)
    for (std::size_t j = 0; j < sweep.sigmas.size(); ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      out << sweep.ns[i] << "," << format_double(sweep.sigmas[j]) << "," << format_double(sweep.value(ii, jj)) << ","
          << format_double(sweep.iddm_mean(ii, jj)) << "," << format_double(sweep.rslocal_mean(ii, jj)) << "\n";
    }
  if (!out) throw std::runtime_error("failed to write sweep_sigma.csv");
}

}  // namespace iddm
