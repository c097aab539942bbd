#pragma once

// Feasible curvilinear search along the Cayley curve with alternating
// Barzilai-Borwein step sizes and a Zhang-Hager nonmonotone Armijo rule.

#include <optional>
#include <vector>

#include "iddm/manifold.hpp"
#include "iddm/problem.hpp"
#include "iddm/report.hpp"
#include "iddm/rng.hpp"

namespace iddm {

struct LocalSolverConfig {
  double grad_tol = 1e-6;
  int max_iters = 1000;
  double ls_rho = 1e-4;        // Armijo slope fraction
  double ls_eta = 0.85;        // weight of the nonmonotone reference average
  double tau_init = 1e-3;
  double tau_min = 1e-20;
  double tau_max = 1e20;
  double ls_backtrack = 0.1;   // step shrink factor per rejected trial
  int ls_max_trials = 10;
  double stall_tol = 1e-12;    // relative objective change
  int stall_window = 5;

  /// Throws ConfigError for out-of-range values.
  void validate() const;
};

struct SolveStats {
  int iterations = 0;
  int function_evals = 0;
  bool converged = false;          // canonical gradient norm <= grad_tol
  bool stalled = false;
  bool line_search_failed = false;
  bool hit_iteration_cap = false;
  bool returned_start = false;     // no iterate improved on X0
  double grad_norm = 0.0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  long long reprojections = 0;
};

struct LocalResult {
  ProductPoint point;
  double objective = 0.0;
  SolveStats stats;
};

/// Frobenius norm of the block-wise canonical gradient.
double canonical_gradient_norm(const ProductPoint& X, const std::vector<Matrix>& G);

/// Throws ContractViolation for an infeasible X0 and DivergedRun for a
/// non-finite objective at X0. Returns a point with F <= F(X0).
LocalResult local_minimize(const ProductPoint& X0, const Problem& problem, const LocalSolverConfig& cfg);

/// Haar-random point with the problem's block shapes; blocks drawn in order.
ProductPoint random_product_point(const std::vector<BlockDim>& dims, RngStream& rng);

/// Repeated local solves. Trial t starts from init_list[t] when provided,
/// otherwise from random_product_point(dims, rng.with_cycle(t)).
RunReport rslocal_run(const Problem& problem, int trials, const LocalSolverConfig& cfg, const RngStream& rng,
                      const std::optional<std::vector<ProductPoint>>& init_list = std::nullopt);

}  // namespace iddm
