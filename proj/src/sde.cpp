#include "iddm/sde.hpp"

#include <cmath>

#include "iddm/errors.hpp"

namespace iddm {

namespace {

bool all_finite(const Matrix& M) { return M.allFinite(); }

bool all_finite(const std::vector<Matrix>& Ms) {
  for (const auto& M : Ms)
    if (!M.allFinite()) return false;
  return true;
}

}  // namespace

Matrix brownian_increment(int n, int p, double delta, RngStream& rng) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("brownian_increment: delta must be > 0");
  const double scale = std::sqrt(delta);
  Matrix dB(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) dB(i, j) = scale * rng.gaussian();
  return dB;
}

Matrix sde_direction(const StiefelPoint& Y, const Matrix& G, double delta, double sigma, const Matrix& dB) {
  const Matrix& y = Y.value();
  if (G.rows() != y.rows() || G.cols() != y.cols()) throw DimensionError("sde_step: gradient shape mismatch");
  if (sigma == 0.0) return -delta * G;
  if (dB.rows() != y.rows() || dB.cols() != y.cols()) throw DimensionError("sde_step: increment shape mismatch");
  const auto n = y.rows();
  const auto p = y.cols();
  if (p == n) return -delta * G + (ProjectionCoefficients::alpha * sigma) * dB;
  // For p = 1 the beta y y^T dB part cancels in A = Z y^T - y Z^T.
  if (p == 1) return -delta * G + sigma * dB;
  return -delta * G + sigma * (dB - ProjectionCoefficients::beta * (y * (y.transpose() * dB)));
}

StiefelPoint sde_step(const StiefelPoint& Y, const Matrix& G, double delta, double sigma, const Matrix& dB) {
  return cayley_update(Y, sde_direction(Y, G, delta, sigma, dB));
}

ProductSdeResult sde_simulate_product(const ProductPoint& Y0, const Problem& problem, const SdeConfig& cfg,
                                      const RngStream& rng) {
  problem.check_shapes(Y0);
  if (cfg.num_steps < 0) throw ConfigError("sde_simulate: num_steps must be >= 0");
  if (!(cfg.dt > 0.0)) throw ConfigError("sde_simulate: dt must be > 0");

  const std::size_t q = Y0.size();
  std::vector<Matrix> X(Y0.blocks().begin(), Y0.blocks().end());
  ProductSdeResult out;
  const int stride = cfg.record_stride;

  auto record = [&](long long k, double sigma) {
    const auto P = ProductPoint::trusted(X);
    const double f = problem(P);
    if (!std::isfinite(f)) {
      throw DivergedRun("sde_simulate: non-finite objective at step " + std::to_string(k), P, k);
    }
    out.trajectory.push_back({k, f, sigma, P.max_feasibility_residual()});
  };

  for (long long k = 0; k < cfg.num_steps; ++k) {
    const double sigma = cfg.schedule.sigma(k);
    if (stride > 0 ? (k % stride == 0) : (k == 0)) record(k, sigma);

    const auto G = problem.euclidean_gradient(X);
    if (!all_finite(G)) {
      throw DivergedRun("sde_simulate: non-finite gradient at step " + std::to_string(k), ProductPoint::trusted(X),
                        k);
    }
    std::vector<Matrix> next(q);
    if (sigma == 0.0) {
      const Matrix none;
      for (std::size_t b = 0; b < q; ++b)
        next[b] = sde_step(StiefelPoint::trusted(X[b]), G[b], cfg.dt, 0.0, none).value();
    } else {
      RngStream step_rng = rng.with_step(static_cast<std::uint64_t>(k));
      for (std::size_t b = 0; b < q; ++b) {
        const auto n = static_cast<int>(X[b].rows());
        const auto p = static_cast<int>(X[b].cols());
        const Matrix dB = brownian_increment(n, p, cfg.dt, step_rng);
        next[b] = sde_step(StiefelPoint::trusted(X[b]), G[b], cfg.dt, sigma, dB).value();
      }
    }
    for (const auto& b : next) {
      if (!all_finite(b)) {
        throw DivergedRun("sde_simulate: non-finite iterate at step " + std::to_string(k + 1),
                          ProductPoint::trusted(X), k);
      }
    }
    X = std::move(next);

    if ((k + 1) % kDriftCheckPeriod == 0) {
      for (auto& b : X) {
        if (feasibility_residual(b) > kDriftTol) {
          b = qr_retract(b).value();
          ++out.reprojections;
        }
      }
    }
  }
  record(cfg.num_steps, cfg.schedule.sigma(cfg.num_steps));
  out.point = ProductPoint::trusted(std::move(X));
  return out;
}

SdeResult sde_simulate(const StiefelPoint& Y0, const Problem& problem, const SdeConfig& cfg,
                       const RngStream& rng) {
  if (!problem.single_block()) throw DimensionError("sde_simulate: problem has more than one block");
  auto res = sde_simulate_product(ProductPoint(std::vector<StiefelPoint>{Y0}), problem, cfg, rng);
  return {res.point.stiefel_block(0), std::move(res.trajectory), res.reprojections};
}

}  // namespace iddm
