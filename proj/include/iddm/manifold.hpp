#pragma once

// Stiefel-manifold geometry under the canonical metric.
//
// Matrices are Eigen::MatrixXd and therefore column-major in memory. Every
// text format written or read by this project lists matrix entries in
// row-major order (row 0 left to right, then row 1, ...).

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace iddm {

using Matrix = Eigen::MatrixXd;

class RngStream;

/// Noise-projection weights. alpha + beta == 1.
struct ProjectionCoefficients {
  static constexpr double alpha = 0.70710678118654752440;  // sqrt(2)/2
  static constexpr double beta = 1.0 - alpha;
};

inline constexpr double kDefaultFeasTol = 1e-8;
inline constexpr double kSkewTol = 1e-10;

/// ||X^T X - I_p||_F.
double feasibility_residual(const Matrix& X);

/// True iff ||X^T X - I_p||_F <= tol.
bool check_feasible(const Matrix& X, double tol);

/// A point on M_{n,p} = {X in R^{n x p} : X^T X = I_p}.
class StiefelPoint {
 public:
  /// Throws ContractViolation if X is not feasible to `feas_tol` or p > n.
  explicit StiefelPoint(Matrix X, double feas_tol = kDefaultFeasTol);

  /// Wraps a matrix produced by an orthogonality-preserving map without
  /// re-checking it. Callers monitor drift themselves.
  static StiefelPoint trusted(Matrix X);

  const Matrix& value() const noexcept { return x_; }
  Eigen::Index rows() const noexcept { return x_.rows(); }
  Eigen::Index cols() const noexcept { return x_.cols(); }
  double feas_tol() const noexcept { return feas_tol_; }

 private:
  StiefelPoint() = default;
  Matrix x_;
  double feas_tol_ = kDefaultFeasTol;
};

/// Element of T_X M: Z^T X + X^T Z = 0.
struct TangentVector {
  Matrix base;
  Matrix value;
};

/// ||Z^T X + X^T Z||_F.
double tangency_residual(const Matrix& X, const Matrix& Z);

/// Ordered list of Stiefel blocks X_1, ..., X_q.
class ProductPoint {
 public:
  ProductPoint() = default;
  explicit ProductPoint(std::vector<StiefelPoint> blocks);
  /// Checks every block to `feas_tol`.
  explicit ProductPoint(std::vector<Matrix> blocks, double feas_tol = kDefaultFeasTol);
  static ProductPoint trusted(std::vector<Matrix> blocks);

  std::size_t size() const noexcept { return blocks_.size(); }
  const Matrix& block(std::size_t i) const { return blocks_.at(i); }
  StiefelPoint stiefel_block(std::size_t i) const { return StiefelPoint::trusted(blocks_.at(i)); }
  std::span<const Matrix> blocks() const noexcept { return blocks_; }

  /// max over blocks of the feasibility residual.
  double max_feasibility_residual() const;

  bool operator==(const ProductPoint& other) const;

 private:
  std::vector<Matrix> blocks_;
};

/// P_X(Z) = Z - alpha X Z^T X - beta X X^T Z.
TangentVector project_tangent(const StiefelPoint& X, const Matrix& Z);

/// Canonical-metric gradient G - X G^T X for the Euclidean gradient G.
TangentVector canonical_gradient(const StiefelPoint& X, const Matrix& G);

/// g^c(Z1, Z2) = tr(Z1^T (I - X X^T / 2) Z2). Both vectors must share base X.
double canonical_inner(const StiefelPoint& X, const TangentVector& Z1, const TangentVector& Z2);

/// Y+ = (I - A/2)^{-1} (I + A/2) Y for skew-symmetric A (n x n), dense LU.
StiefelPoint cayley_step(const StiefelPoint& Y, const Matrix& A);

struct CayleyResult {
  StiefelPoint point;
  /// Set when the 2p x 2p system was singular and the dense path was used.
  bool fell_back = false;
};

/// Same map as cayley_step with A = Z Y^T - Y Z^T, computed through the
/// Sherman-Morrison-Woodbury identity in O(n p^2).
CayleyResult cayley_step_smw(const StiefelPoint& Y, const Matrix& Z);

/// Closed-form rank-2 update for p = 1.
StiefelPoint cayley_step_sphere(const StiefelPoint& y, const Matrix& z);

/// A = Z Y^T - Y Z^T, skew by construction.
Matrix cayley_generator(const Matrix& Z, const Matrix& Y);

/// Chooses the cheapest exact route for A = Z Y^T - Y Z^T:
/// sphere closed form for p = 1 < n/2, SMW for 2p < n, dense LU otherwise.
StiefelPoint cayley_update(const StiefelPoint& Y, const Matrix& Z);

/// Q factor of the thin QR decomposition with a non-negative R diagonal.
StiefelPoint qr_retract(const Matrix& X);

/// Q factor of an n x p standard Gaussian matrix (Haar distributed).
StiefelPoint random_point(int n, int p, RngStream& rng);

/// ||A + A^T||_F.
inline double skew_residual(const Matrix& A) { return (A + A.transpose()).norm(); }

}  // namespace iddm
