#pragma once

// Monte-Carlo and deterministic checks of the diffusion's defining identities:
// the extrinsic Laplace-Beltrami operator, the Ito drift, strong order and
// Gibbs stationarity on the circle.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "iddm/manifold.hpp"
#include "iddm/problem.hpp"
#include "iddm/rng.hpp"

namespace iddm {

/// phi with its Euclidean first and second partials. hess_apply(X, i, j, u, v)
/// returns d^2 phi / dX_ij dX_uv.
struct TestFunction {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> grad;
  std::function<double(const Matrix&, int, int, int, int)> hess_apply;
};

/// phi(X) = tr(C^T X).
TestFunction linear_test_function(Matrix C);
/// phi(X) = 1/2 vec(X)^T H vec(X) + c, vec column-major, H symmetric (np x np).
TestFunction quadratic_test_function(Matrix H, double c = 0.0);
/// phi(X) = ||X||_F^2, which equals p on the manifold.
TestFunction frobenius_test_function();

/// Delta_M phi = sum d^2_ij phi - sum X_iv X_uj d_ij d_uv phi - (n-1) sum X_ij d_ij phi.
double lb_apply(const TestFunction& f, const StiefelPoint& X);

/// Result of one statistical comparison. `passed` iff |estimate - target| <= tolerance.
struct McResult {
  double estimate = 0.0;
  double target = 0.0;
  double std_error = 0.0;
  double tolerance = 0.0;
  double zscore = 0.0;
  bool passed = false;
};

/// Absolute allowance for rounding in a single Cayley step.
inline constexpr double kRoundingFloor = 1e-10;

/// Tolerance used by every Monte-Carlo check: 3 standard errors plus 5 h |target|
/// plus kRoundingFloor.
double mc_tolerance(double std_error, double h, double target);

/// (E[phi(W_h)] - phi(X0)) / h from one-step pure-diffusion paths (G = 0, sigma = 1)
/// against 1/2 Delta_M phi(X0). Sample s draws from rng.with_step(s).
McResult generator_mc_check(const StiefelPoint& X0, const TestFunction& f, double h, long long num_samples,
                            const RngStream& rng);

struct DriftResult {
  Matrix mean_increment;
  Matrix target;
  Matrix std_error;
  double max_zscore = 0.0;
  /// max over entries of |mean - target| - (3 SE + 5 h |target|); <= 0 means pass.
  double worst_excess = 0.0;
  bool passed = false;
};

/// Test-only fault injection.
struct VerifyHooks {
  /// Negates every sampled increment, which reverses the drift.
  bool flip_drift_sign = false;
};

/// Entry-wise E[W_h - X0] against -((n-1)/2) sigma^2 X0 h for pure diffusion.
DriftResult ito_drift_check(const StiefelPoint& X0, double h, double sigma, long long num_samples,
                            const RngStream& rng, const VerifyHooks& hooks = {});

struct StrongOrderResult {
  double slope = 0.0;
  /// (delta, rms error) per coarse level, finest first.
  std::vector<std::pair<double, double>> pairs;
};

/// Pathwise self-convergence: each path is simulated on the finest grid and on
/// grids coarsened by 2^l, l = 1..levels, using summed increments of the same
/// Brownian path. Returns the least-squares slope of log rms error against
/// log(delta - finest delta), the step difference that drives the error.
StrongOrderResult strong_order_check(const Problem& problem, const StiefelPoint& X0, double T, long long finest_K,
                                     int levels, int num_paths, double sigma, const RngStream& rng);

struct GibbsResult {
  double tv_distance = 0.0;
  /// Distance of the same histogram to the uniform distribution.
  double tv_to_uniform = 0.0;
  std::vector<double> empirical;  // bin probabilities
  std::vector<double> target;
};

inline constexpr int kGibbsBins = 72;

/// Constant-sigma chain for F(x) = c x_1 on the unit circle; angle histogram
/// (72 bins) after burn-in against exp(-2 c cos(theta) / sigma^2) / Z.
GibbsResult gibbs_circle_check(double c_height, double sigma, long long burn_in, long long num_samples,
                               const RngStream& rng, double dt = 1e-2);

/// Max over entries of |analytic - central difference| divided by the largest
/// analytic entry (floored at 1e-8). Throws ContractViolation unless h in [1e-8, 1e-4].
double finite_diff_gradient_check(const Problem& problem, const ProductPoint& X, double h);

enum class VerifyBudget { Quick, Full };

struct CheckRecord {
  std::string name;
  double estimate = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  VerifyBudget budget = VerifyBudget::Quick;
  std::vector<CheckRecord> checks;
  bool all_passed() const;
  /// {"budget": ..., "passed": ..., "checks": [{name, estimate, target, tolerance, passed, detail}]}
  std::string to_json() const;
};

VerifyReport verify_all(VerifyBudget budget, std::uint64_t seed, const VerifyHooks& hooks = {});

}  // namespace iddm
