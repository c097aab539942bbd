#include "iddm/local_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>

#include "iddm/errors.hpp"
#include "iddm/sde.hpp"

namespace iddm {

void LocalSolverConfig::validate() const {
  if (!(grad_tol >= 0.0)) throw ConfigError("local solver: grad_tol must be >= 0");
  if (max_iters < 0) throw ConfigError("local solver: max_iters must be >= 0");
  if (!(ls_rho > 0.0 && ls_rho < 1.0)) throw ConfigError("local solver: ls_rho must lie in (0, 1)");
  if (!(ls_eta > 0.0 && ls_eta < 1.0)) throw ConfigError("local solver: ls_eta must lie in (0, 1)");
  if (!(ls_backtrack > 0.0 && ls_backtrack < 1.0)) throw ConfigError("local solver: ls_backtrack must lie in (0, 1)");
  if (!(tau_min > 0.0 && tau_min <= tau_max)) throw ConfigError("local solver: need 0 < tau_min <= tau_max");
  if (!(tau_init > 0.0)) throw ConfigError("local solver: tau_init must be > 0");
  if (ls_max_trials < 1) throw ConfigError("local solver: ls_max_trials must be >= 1");
  if (stall_window < 1) throw ConfigError("local solver: stall_window must be >= 1");
}

double canonical_gradient_norm(const ProductPoint& X, const std::vector<Matrix>& G) {
  double s = 0.0;
  for (std::size_t b = 0; b < X.size(); ++b) {
    const Matrix& x = X.block(b);
    s += (G[b] - x * (G[b].transpose() * x)).squaredNorm();
  }
  return std::sqrt(s);
}

namespace {

std::vector<Matrix> canonical_gradients(const ProductPoint& X, const std::vector<Matrix>& G) {
  std::vector<Matrix> out(X.size());
  for (std::size_t b = 0; b < X.size(); ++b) {
    const Matrix& x = X.block(b);
    out[b] = G[b] - x * (G[b].transpose() * x);
  }
  return out;
}

double squared_norm(const std::vector<Matrix>& Ms) {
  double s = 0.0;
  for (const auto& M : Ms) s += M.squaredNorm();
  return s;
}

double inner(const std::vector<Matrix>& A, const std::vector<Matrix>& B) {
  double s = 0.0;
  for (std::size_t b = 0; b < A.size(); ++b) s += (A[b].array() * B[b].array()).sum();
  return s;
}

ProductPoint curve_point(const ProductPoint& X, const std::vector<Matrix>& G, double tau) {
  std::vector<Matrix> out(X.size());
  for (std::size_t b = 0; b < X.size(); ++b) {
    out[b] = cayley_update(X.stiefel_block(b), -tau * G[b]).value();
  }
  return ProductPoint::trusted(std::move(out));
}

}  // namespace

LocalResult local_minimize(const ProductPoint& X0, const Problem& problem, const LocalSolverConfig& cfg) {
  cfg.validate();
  problem.check_shapes(X0);
  for (std::size_t b = 0; b < X0.size(); ++b) {
    if (!check_feasible(X0.block(b), kDefaultFeasTol)) {
      throw ContractViolation("local_minimize: initial block " + std::to_string(b) + " is infeasible");
    }
  }

  LocalResult res;
  SolveStats& st = res.stats;

  ProductPoint X = X0;
  double F = problem(X);
  ++st.function_evals;
  if (!std::isfinite(F)) throw DivergedRun("local_minimize: non-finite objective at the start point", X0, 0);
  std::vector<Matrix> G = problem.gradient(X);
  std::vector<Matrix> dtX = canonical_gradients(X, G);
  double nrmG = std::sqrt(squared_norm(dtX));
  st.initial_objective = F;

  double tau = cfg.tau_init;
  double Q = 1.0;
  double Cval = F;
  std::deque<bool> small_changes;

  int itr = 0;
  while (nrmG > cfg.grad_tol) {
    if (itr >= cfg.max_iters) {
      st.hit_iteration_cap = true;
      break;
    }
    ++itr;
    const ProductPoint XP = X;
    const double FP = F;
    const std::vector<Matrix> GP = G;
    const std::vector<Matrix> dtXP = dtX;
    const double deriv = cfg.ls_rho * nrmG * nrmG;

    bool accepted = false;
    for (int trial = 1; trial <= cfg.ls_max_trials; ++trial) {
      ProductPoint cand = curve_point(XP, GP, tau);
      const double Fc = problem(cand);
      ++st.function_evals;
      if (std::isfinite(Fc) && Fc <= Cval - tau * deriv) {
        X = std::move(cand);
        F = Fc;
        accepted = true;
        break;
      }
      tau *= cfg.ls_backtrack;
    }
    if (!accepted) {
      st.line_search_failed = true;
      X = XP;
      F = FP;
      break;
    }

    if (itr % kDriftCheckPeriod == 0) {
      std::vector<Matrix> blocks(X.blocks().begin(), X.blocks().end());
      bool changed = false;
      for (auto& b : blocks) {
        if (feasibility_residual(b) > kDriftTol) {
          b = qr_retract(b).value();
          ++st.reprojections;
          changed = true;
        }
      }
      if (changed) {
        X = ProductPoint::trusted(std::move(blocks));
        F = problem(X);
        ++st.function_evals;
      }
    }

    G = problem.gradient(X);
    dtX = canonical_gradients(X, G);
    nrmG = std::sqrt(squared_norm(dtX));

    // Alternating Barzilai-Borwein step on the canonical-gradient difference.
    std::vector<Matrix> S(X.size()), Y(X.size());
    for (std::size_t b = 0; b < X.size(); ++b) {
      S[b] = X.block(b) - XP.block(b);
      Y[b] = dtX[b] - dtXP[b];
    }
    const double SY = std::abs(inner(S, Y));
    if (SY > 0.0) {
      tau = (itr % 2 == 0) ? squared_norm(S) / SY : SY / squared_norm(Y);
    } else {
      tau = cfg.tau_max;
    }
    if (!std::isfinite(tau)) tau = cfg.tau_max;
    tau = std::clamp(tau, cfg.tau_min, cfg.tau_max);

    const double rel_change = std::abs(FP - F) / (std::abs(FP) + 1.0);
    small_changes.push_back(rel_change <= cfg.stall_tol);
    if (static_cast<int>(small_changes.size()) > cfg.stall_window) small_changes.pop_front();
    if (static_cast<int>(small_changes.size()) == cfg.stall_window &&
        std::all_of(small_changes.begin(), small_changes.end(), [](bool b) { return b; }) &&
        nrmG > cfg.grad_tol) {
      st.stalled = true;
      break;
    }

    const double Qp = Q;
    Q = cfg.ls_eta * Qp + 1.0;
    Cval = (cfg.ls_eta * Qp * Cval + F) / Q;
  }

  st.iterations = itr;
  if (F > st.initial_objective) {
    res.point = X0;
    res.objective = st.initial_objective;
    st.returned_start = true;
    st.grad_norm = canonical_gradient_norm(X0, problem.gradient(X0));
  } else {
    res.point = std::move(X);
    res.objective = F;
    st.grad_norm = nrmG;
  }
  st.converged = st.grad_norm <= cfg.grad_tol;
  st.final_objective = res.objective;
  return res;
}

ProductPoint random_product_point(const std::vector<BlockDim>& dims, RngStream& rng) {
  std::vector<Matrix> blocks;
  blocks.reserve(dims.size());
  for (const auto& d : dims) blocks.push_back(random_point(d.n, d.p, rng).value());
  return ProductPoint::trusted(std::move(blocks));
}

RunReport rslocal_run(const Problem& problem, int trials, const LocalSolverConfig& cfg, const RngStream& rng,
                      const std::optional<std::vector<ProductPoint>>& init_list) {
  if (trials < 1) throw ConfigError("rslocal_run: trials must be >= 1");
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();

  RunReport report;
  report.algorithm = "rslocal";
  report.seed = rng.seed();
  for (int t = 0; t < trials; ++t) {
    const auto t0 = clock::now();
    ProductPoint X0;
    if (init_list && static_cast<std::size_t>(t) < init_list->size()) {
      X0 = (*init_list)[static_cast<std::size_t>(t)];
    } else {
      RngStream trial_rng = rng.with_cycle(static_cast<std::uint64_t>(t));
      X0 = random_product_point(problem.block_dims, trial_rng);
    }
    LocalResult lr = local_minimize(X0, problem, cfg);
    if (t == 0) report.initial_objective = lr.stats.initial_objective;

    CycleRecord rec;
    rec.index = t;
    rec.post_local_objective = lr.objective;
    rec.local_iterations = lr.stats.iterations;
    rec.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    report.cycles.push_back(rec);

    if (lr.objective < report.best_objective) {
      report.best_objective = lr.objective;
      report.best_point = std::move(lr.point);
    }
  }
  report.wall_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
  return report;
}

}  // namespace iddm
