#include "iddm/manifold.hpp"

#include <algorithm>
#include <sstream>

#include "iddm/errors.hpp"
#include "iddm/rng.hpp"

namespace iddm {

namespace {

std::string shape(const Matrix& M) {
  std::ostringstream os;
  os << M.rows() << "x" << M.cols();
  return os.str();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape " + shape(a) + " vs " + shape(b));
  }
}

void require_same_base(const Matrix& X, const TangentVector& Z) {
  if (Z.base.rows() != X.rows() || Z.base.cols() != X.cols() || (Z.base - X).norm() > 1e-12) {
    throw ContractViolation("canonical_inner: tangent vector is based at a different point");
  }
}

}  // namespace

double feasibility_residual(const Matrix& X) {
  const auto p = X.cols();
  return (X.transpose() * X - Matrix::Identity(p, p)).norm();
}

bool check_feasible(const Matrix& X, double tol) {
  if (X.size() == 0) throw ContractViolation("check_feasible: empty matrix");
  return feasibility_residual(X) <= tol;
}

double tangency_residual(const Matrix& X, const Matrix& Z) {
  require_same_shape(X, Z, "tangency_residual");
  const Matrix S = Z.transpose() * X;
  return (S + S.transpose()).norm();
}

StiefelPoint::StiefelPoint(Matrix X, double feas_tol) : x_(std::move(X)), feas_tol_(feas_tol) {
  if (x_.cols() < 1 || x_.rows() < x_.cols()) {
    throw ContractViolation("StiefelPoint: need 1 <= p <= n, got " + shape(x_));
  }
  const double r = feasibility_residual(x_);
  if (!(r <= feas_tol_)) {
    std::ostringstream os;
    os << "StiefelPoint: ||X^T X - I||_F = " << r << " exceeds " << feas_tol_;
    throw ContractViolation(os.str());
  }
}

StiefelPoint StiefelPoint::trusted(Matrix X) {
  StiefelPoint out;
  out.x_ = std::move(X);
  return out;
}

ProductPoint::ProductPoint(std::vector<StiefelPoint> blocks) {
  blocks_.reserve(blocks.size());
  for (auto& b : blocks) blocks_.push_back(b.value());
}

ProductPoint::ProductPoint(std::vector<Matrix> blocks, double feas_tol) {
  for (const auto& b : blocks) (void)StiefelPoint(b, feas_tol);
  blocks_ = std::move(blocks);
}

ProductPoint ProductPoint::trusted(std::vector<Matrix> blocks) {
  ProductPoint out;
  out.blocks_ = std::move(blocks);
  return out;
}

double ProductPoint::max_feasibility_residual() const {
  double r = 0.0;
  for (const auto& b : blocks_) r = std::max(r, feasibility_residual(b));
  return r;
}

bool ProductPoint::operator==(const ProductPoint& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& a = blocks_[i];
    const auto& b = other.blocks_[i];
    if (a.rows() != b.rows() || a.cols() != b.cols() || a != b) return false;
  }
  return true;
}

TangentVector project_tangent(const StiefelPoint& X, const Matrix& Z) {
  const Matrix& x = X.value();
  require_same_shape(x, Z, "project_tangent");
  Matrix P = Z - ProjectionCoefficients::alpha * (x * (Z.transpose() * x)) -
             ProjectionCoefficients::beta * (x * (x.transpose() * Z));
  return {x, std::move(P)};
}

TangentVector canonical_gradient(const StiefelPoint& X, const Matrix& G) {
  const Matrix& x = X.value();
  require_same_shape(x, G, "canonical_gradient");
  Matrix g = G - x * (G.transpose() * x);
  return {x, std::move(g)};
}

double canonical_inner(const StiefelPoint& X, const TangentVector& Z1, const TangentVector& Z2) {
  const Matrix& x = X.value();
  require_same_base(x, Z1);
  require_same_base(x, Z2);
  require_same_shape(Z1.value, Z2.value, "canonical_inner");
  // tr(Z1^T Z2) - 1/2 tr((X^T Z1)^T (X^T Z2))
  const Matrix xz1 = x.transpose() * Z1.value;
  const Matrix xz2 = x.transpose() * Z2.value;
  return (Z1.value.array() * Z2.value.array()).sum() - 0.5 * (xz1.array() * xz2.array()).sum();
}

StiefelPoint cayley_step(const StiefelPoint& Y, const Matrix& A) {
  const Matrix& y = Y.value();
  const auto n = y.rows();
  if (A.rows() != n || A.cols() != n) {
    throw DimensionError("cayley_step: A must be " + std::to_string(n) + "x" + std::to_string(n) +
                         ", got " + shape(A));
  }
  const double skew = skew_residual(A);
  if (!(skew <= kSkewTol)) {
    std::ostringstream os;
    os << "cayley_step: ||A + A^T||_F = " << skew << " exceeds " << kSkewTol;
    throw ContractViolation(os.str());
  }
  const Matrix I = Matrix::Identity(n, n);
  const Matrix rhs = y + 0.5 * (A * y);
  Eigen::PartialPivLU<Matrix> lu(I - 0.5 * A);
  return StiefelPoint::trusted(lu.solve(rhs));
}

Matrix cayley_generator(const Matrix& Z, const Matrix& Y) {
  require_same_shape(Z, Y, "cayley_generator");
  const Matrix M = Z * Y.transpose();
  return M - M.transpose();
}

CayleyResult cayley_step_smw(const StiefelPoint& Y, const Matrix& Z) {
  const Matrix& y = Y.value();
  require_same_shape(y, Z, "cayley_step_smw");
  const auto n = y.rows();
  const auto p = y.cols();

  // Dropping the symmetric part of Y^T Z leaves A unchanged and keeps the
  // 2p x 2p system well scaled when Z has a large component along Y.
  const Matrix S = y.transpose() * Z;
  const Matrix Zr = Z - 0.5 * y * (S + S.transpose());

  Matrix U(n, 2 * p);
  U << Zr, y;
  Matrix V(n, 2 * p);
  V << y, -Zr;

  const Matrix VU = V.transpose() * U;
  const Matrix VY = V.transpose() * y;
  const Matrix K = Matrix::Identity(2 * p, 2 * p) - 0.5 * VU;

  Eigen::FullPivLU<Matrix> lu(K);
  if (lu.isInvertible()) {
    const Matrix W = lu.solve(VY);
    const double resid = (K * W - VY).norm();
    if (std::isfinite(resid) && resid <= 1e-10 * std::max(1.0, VY.norm())) {
      return {StiefelPoint::trusted(y + U * W), false};
    }
  }
  return {cayley_step(Y, cayley_generator(Z, y)), true};
}

StiefelPoint cayley_step_sphere(const StiefelPoint& y, const Matrix& z) {
  const Matrix& v = y.value();
  require_same_shape(v, z, "cayley_step_sphere");
  if (v.cols() != 1) throw DimensionError("cayley_step_sphere: expects a column vector");
  // A = z y^T - y z^T ignores the component of z along y. With s = |y|^2,
  // w = z - (y^T z / s) y and c = s |w|^2 the step is
  // ((1 - c/4) y + s w) / (1 + c/4). It preserves |y| exactly, so neither
  // long steps nor earlier rounding in |y| get amplified.
  const double s = v.col(0).squaredNorm();
  const Eigen::VectorXd w = z.col(0) - (z.col(0).dot(v.col(0)) / s) * v.col(0);
  const double c = s * w.squaredNorm();
  Matrix out = ((1.0 - 0.25 * c) * v.col(0) + s * w) / (1.0 + 0.25 * c);
  return StiefelPoint::trusted(std::move(out));
}

StiefelPoint cayley_update(const StiefelPoint& Y, const Matrix& Z) {
  const auto n = Y.rows();
  const auto p = Y.cols();
  if (2 * p < n) {
    if (p == 1) return cayley_step_sphere(Y, Z);
    return cayley_step_smw(Y, Z).point;
  }
  require_same_shape(Y.value(), Z, "cayley_update");
  return cayley_step(Y, cayley_generator(Z, Y.value()));
}

StiefelPoint qr_retract(const Matrix& X) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (p < 1 || n < p) throw ContractViolation("qr_retract: need 1 <= p <= n, got " + shape(X));
  Eigen::HouseholderQR<Matrix> qr(X);
  const Matrix R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  double rmax = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) rmax = std::max(rmax, std::abs(R(j, j)));
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(std::abs(R(j, j)) > 1e-12 * std::max(rmax, 1e-300))) {
      throw NumericalRankError("qr_retract: column " + std::to_string(j) +
                               " is numerically dependent on the preceding columns");
    }
  }
  Matrix Q = qr.householderQ() * Matrix::Identity(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  }
  return StiefelPoint::trusted(std::move(Q));
}

StiefelPoint random_point(int n, int p, RngStream& rng) {
  if (p < 1 || n < p) throw ContractViolation("random_point: need 1 <= p <= n");
  Matrix G(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) G(i, j) = rng.gaussian();
  return qr_retract(G);
}

}  // namespace iddm
