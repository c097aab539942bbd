#include "iddm/driver.hpp"

#include <chrono>
#include <cmath>

#include "iddm/errors.hpp"

namespace iddm {

void IddmConfig::validate() const {
  if (num_cycles < 1) throw ConfigError("iddm: num_cycles must be >= 1");
  if (sde.num_steps < 0) throw ConfigError("iddm: sde.num_steps must be >= 0");
  if (!(sde.dt > 0.0)) throw ConfigError("iddm: sde.dt must be > 0");
  if (early_stop && patience < 1) throw ConfigError("iddm: patience must be >= 1");
  local.validate();
}

RunReport incumbent_update(RunReport report, const ProductPoint& candidate, double value) {
  if (value < report.best_objective) {
    report.best_objective = value;
    report.best_point = candidate;
  }
  return report;
}

RunReport iddm_run(const Problem& problem, const ProductPoint& X0, const IddmConfig& cfg, const RngStream& rng) {
  cfg.validate();
  problem.check_shapes(X0);
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();

  RunReport report;
  report.algorithm = "iddm";
  report.seed = rng.seed();

  ProductPoint Xk = X0;
  if (cfg.initial_local_solve) {
    LocalResult lr = local_minimize(X0, problem, cfg.local);
    report.initial_objective = lr.stats.initial_objective;
    Xk = lr.point;
    report = incumbent_update(std::move(report), lr.point, lr.objective);
  } else {
    const double f0 = problem(X0);
    report.initial_objective = f0;
    report = incumbent_update(std::move(report), X0, f0);
  }

  const bool diffuse = !cfg.sde.schedule.identically_zero() && cfg.sde.num_steps > 0;
  int since_improvement = 0;
  for (int c = 0; c < cfg.num_cycles; ++c) {
    const auto t0 = clock::now();
    CycleRecord rec;
    rec.index = c;

    const ProductPoint& start = cfg.keep_incumbent_start ? Xk : report.best_point;
    ProductPoint Xp = start;
    try {
      if (diffuse) {
        Xp = sde_simulate_product(start, problem, cfg.sde, rng.with_cycle(static_cast<std::uint64_t>(c))).point;
        rec.post_diffusion_objective = problem(Xp);
      }
      if (!std::isfinite(rec.post_diffusion_objective) && diffuse) {
        throw DivergedRun("iddm: non-finite objective after diffusion", start, cfg.sde.num_steps);
      }
      LocalResult lr = local_minimize(Xp, problem, cfg.local);
      rec.post_local_objective = lr.objective;
      rec.local_iterations = lr.stats.iterations;
      Xk = std::move(lr.point);
    } catch (const DivergedRun&) {
      rec.diverged = true;
    }
    rec.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();

    const double before = report.best_objective;
    if (!rec.diverged) report = incumbent_update(std::move(report), Xk, rec.post_local_objective);
    report.cycles.push_back(rec);

    since_improvement = report.best_objective < before ? 0 : since_improvement + 1;
    if (cfg.early_stop && since_improvement >= cfg.patience) break;
  }
  report.wall_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
  return report;
}

}  // namespace iddm
