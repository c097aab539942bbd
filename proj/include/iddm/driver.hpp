#pragma once

// Intermittent diminishing diffusion on Stiefel products: alternate a
// diffusion cycle (noisy Cayley flow with a schedule restarted each cycle)
// with a deterministic local solve, keeping the best local minimizer.

#include "iddm/local_solver.hpp"
#include "iddm/problem.hpp"
#include "iddm/report.hpp"
#include "iddm/rng.hpp"
#include "iddm/sde.hpp"

namespace iddm {

struct IddmConfig {
  int num_cycles = 10;
  SdeConfig sde;
  LocalSolverConfig local;
  /// true: cycle k diffuses from the previous cycle's local minimizer X_k.
  /// false: it diffuses from the incumbent X_opt.
  bool keep_incumbent_start = true;
  /// Local solve from X0 before the first cycle.
  bool initial_local_solve = true;
  /// Stop after `patience` consecutive cycles without strict improvement.
  bool early_stop = false;
  int patience = 3;

  void validate() const;
};

/// Cycle c draws its increments from rng.with_cycle(c). A cycle whose
/// schedule is identically zero skips the diffusion phase. A diverged
/// cycle is recorded and skipped.
RunReport iddm_run(const Problem& problem, const ProductPoint& X0, const IddmConfig& cfg, const RngStream& rng);

/// Replaces the incumbent iff value is strictly smaller.
RunReport incumbent_update(RunReport report, const ProductPoint& candidate, double value);

}  // namespace iddm
