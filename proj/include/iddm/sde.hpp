#pragma once

// Projected-noise SDE on Stiefel blocks, integrated with Cayley steps:
//
//   Z_k     = -delta_k G_k + sigma_k (I - beta Y_k Y_k^T) dB_k
//   A_k     = Z_k Y_k^T - Y_k Z_k^T
//   Y_{k+1} = (I - A_k/2)^{-1} (I + A_k/2) Y_k
//
// Every iterate stays on the manifold up to rounding.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "iddm/manifold.hpp"
#include "iddm/problem.hpp"
#include "iddm/rng.hpp"
#include "iddm/schedule.hpp"

namespace iddm {

struct SdeConfig {
  double dt = 1e-2;
  long long num_steps = 100;
  DiffusionSchedule schedule = DiffusionSchedule::constant(0.0);
  /// Record every `record_stride`-th step; 1 records everything, 0 only the endpoints.
  int record_stride = 10;

  /// Cycle diffusion time T = K * dt.
  double diffusion_time() const noexcept { return dt * static_cast<double>(num_steps); }
};

struct TrajectoryPoint {
  long long step = 0;
  double objective = 0.0;
  double sigma = 0.0;
  double feasibility = 0.0;
};
using Trajectory = std::vector<TrajectoryPoint>;

/// A simulation hit a non-finite objective or gradient.
class DivergedRun : public std::runtime_error {
 public:
  DivergedRun(const std::string& what, ProductPoint last_finite, long long step)
      : std::runtime_error(what), last_finite_(std::move(last_finite)), step_(step) {}
  const ProductPoint& last_finite() const noexcept { return last_finite_; }
  long long step() const noexcept { return step_; }

 private:
  ProductPoint last_finite_;
  long long step_;
};

/// n x p matrix of i.i.d. N(0, delta) entries, filled column by column.
Matrix brownian_increment(int n, int p, double delta, RngStream& rng);

/// Z_k for one step, using the simplified forms for p = n and p = 1.
Matrix sde_direction(const StiefelPoint& Y, const Matrix& G, double delta, double sigma, const Matrix& dB);

/// One Cayley step of the scheme. sigma == 0 skips the noise term entirely.
StiefelPoint sde_step(const StiefelPoint& Y, const Matrix& G, double delta, double sigma, const Matrix& dB);

struct SdeResult {
  StiefelPoint point;
  Trajectory trajectory;
  long long reprojections = 0;
};

struct ProductSdeResult {
  ProductPoint point;
  Trajectory trajectory;
  long long reprojections = 0;
};

/// Residual threshold and period of the QR re-projection policy.
inline constexpr double kDriftTol = 1e-8;
inline constexpr long long kDriftCheckPeriod = 100;

/// K steps on a product of blocks with a shared sigma_k. Step k draws its
/// increments from rng.with_step(k), block by block in order.
ProductSdeResult sde_simulate_product(const ProductPoint& Y0, const Problem& problem, const SdeConfig& cfg,
                                      const RngStream& rng);

/// Single-block form; identical to sde_simulate_product on a one-block product.
SdeResult sde_simulate(const StiefelPoint& Y0, const Problem& problem, const SdeConfig& cfg,
                       const RngStream& rng);

}  // namespace iddm
