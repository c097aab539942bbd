#include "iddm/cryoem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "iddm/errors.hpp"
#include "iddm/format.hpp"

namespace iddm {

void CryoEmInstance::validate() const {
  if (N < 2) throw ContractViolation("cryoem: need N >= 2");
  if (true_rotations.size() != static_cast<std::size_t>(N) ||
      common_lines.size() != static_cast<std::size_t>(N) * static_cast<std::size_t>(N)) {
    throw ContractViolation("cryoem: inconsistent sizes");
  }
  for (const auto& R : true_rotations) {
    if ((R.transpose() * R - Rotation::Identity()).norm() > 1e-10 || std::abs(R.determinant() - 1.0) > 1e-10) {
      throw ContractViolation("cryoem: a true rotation is not in SO(3)");
    }
  }
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (i != j && std::abs(c(i, j).norm() - 1.0) > 1e-10) {
        throw ContractViolation("cryoem: common line (" + std::to_string(i) + "," + std::to_string(j) +
                                ") is not a unit vector");
      }
  if (!(q > 0.0) || !(smoothing_eps > 0.0)) throw ContractViolation("cryoem: need q > 0 and eps > 0");
}

Rotation random_rotation(RngStream& rng) {
  Rotation G;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) G(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Rotation> qr(G);
  Rotation Q = qr.householderQ();
  const Rotation R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < 3; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  if (Q.determinant() < 0.0) Q.col(2) = -Q.col(2);
  return Q;
}

namespace {

Vec2 random_unit2(RngStream& rng) {
  const double t = 2.0 * std::numbers::pi * rng.uniform();
  return {std::cos(t), std::sin(t)};
}

}  // namespace

CryoEmInstance cryoem_generate(int N, double corruption_p, RngStream& rng) {
  if (N < 2) throw ContractViolation("cryoem_generate: need N >= 2");
  if (!(corruption_p >= 0.0 && corruption_p <= 1.0)) {
    throw ContractViolation("cryoem_generate: corruption_p must lie in [0, 1]");
  }
  CryoEmInstance inst;
  inst.N = N;
  inst.corruption_prob = corruption_p;
  inst.true_rotations.reserve(static_cast<std::size_t>(N));
  inst.common_lines.assign(static_cast<std::size_t>(N) * static_cast<std::size_t>(N), Vec2::Zero());

  // A rotation whose viewing direction is nearly parallel to an earlier one is redrawn.
  for (int i = 0; i < N; ++i) {
    while (true) {
      const Rotation R = random_rotation(rng);
      bool ok = true;
      for (const auto& P : inst.true_rotations) {
        if (P.col(2).cross(R.col(2)).norm() < 1e-8) {
          ok = false;
          break;
        }
      }
      if (ok) {
        inst.true_rotations.push_back(R);
        break;
      }
    }
  }

  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      const Rotation& Ri = inst.true_rotations[static_cast<std::size_t>(i)];
      const Rotation& Rj = inst.true_rotations[static_cast<std::size_t>(j)];
      Vec2 cij;
      Vec2 cji;
      if (corruption_p > 0.0 && rng.uniform() < corruption_p) {
        cij = random_unit2(rng);
        cji = random_unit2(rng);
      } else {
        const Eigen::Vector3d l = Ri.col(2).cross(Rj.col(2)).normalized();
        cij = (Ri.transpose() * l).head<2>();
        cji = (Rj.transpose() * l).head<2>();
        // l is orthogonal to both viewing directions, so these are unit up to rounding.
        cij.normalize();
        cji.normalize();
      }
      inst.common_lines[static_cast<std::size_t>(i * N + j)] = cij;
      inst.common_lines[static_cast<std::size_t>(j * N + i)] = cji;
    }
  return inst;
}

Problem cryoem_problem(const CryoEmInstance& inst) {
  inst.validate();
  const int N = inst.N;
  auto lines = std::make_shared<const std::vector<Vec2>>(inst.common_lines);
  const double q = inst.q;
  const double eps2 = inst.smoothing_eps * inst.smoothing_eps;

  Problem P;
  P.name = "cryoem";
  P.block_dims.assign(static_cast<std::size_t>(N), BlockDim{3, 2});
  P.value = [N, lines, q, eps2](std::span<const Matrix> X) {
    double f = 0.0;
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j) {
        const Eigen::Vector3d d = X[static_cast<std::size_t>(i)] * (*lines)[static_cast<std::size_t>(i * N + j)] -
                                  X[static_cast<std::size_t>(j)] * (*lines)[static_cast<std::size_t>(j * N + i)];
        for (int l = 0; l < 3; ++l) f += std::pow(d(l) * d(l) + eps2, 0.5 * q);
      }
    return f;
  };
  P.euclidean_gradient = [N, lines, q, eps2](std::span<const Matrix> X) {
    std::vector<Matrix> G(static_cast<std::size_t>(N), Matrix::Zero(3, 2));
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j) {
        const Vec2& cij = (*lines)[static_cast<std::size_t>(i * N + j)];
        const Vec2& cji = (*lines)[static_cast<std::size_t>(j * N + i)];
        const Eigen::Vector3d d = X[static_cast<std::size_t>(i)] * cij - X[static_cast<std::size_t>(j)] * cji;
        Eigen::Vector3d w;
        for (int l = 0; l < 3; ++l) w(l) = q * std::pow(d(l) * d(l) + eps2, 0.5 * q - 1.0) * d(l);
        G[static_cast<std::size_t>(i)] += w * cij.transpose();
        G[static_cast<std::size_t>(j)] -= w * cji.transpose();
      }
    return G;
  };
  return P;
}

namespace {

Matrix polar(const Matrix& A) {
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

ProductPoint eigs_init(const CryoEmInstance& inst) {
  if (inst.N < 3) throw ContractViolation("eigs_init: need N >= 3");
  const int N = inst.N;
  Matrix S = Matrix::Zero(2 * N, 2 * N);
  std::vector<Eigen::Matrix2d> D(static_cast<std::size_t>(N), Eigen::Matrix2d::Zero());
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (i != j) {
        S.block<2, 2>(2 * i, 2 * j) = inst.c(i, j) * inst.c(j, i).transpose();
        D[static_cast<std::size_t>(i)] += inst.c(i, j) * inst.c(i, j).transpose();
      }

  // Clean data gives S W = D W for W the stack of B_i^T (B_i the first two
  // columns of R_i), and |v^T S v| <= v^T D v always, so the top generalized
  // eigenvalue is exactly 1. Solve it in symmetric form D^{-1/2} S D^{-1/2}.
  Matrix Dm12 = Matrix::Zero(2 * N, 2 * N);
  for (int i = 0; i < N; ++i) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> ed(D[static_cast<std::size_t>(i)]);
    const Eigen::Vector2d ev = ed.eigenvalues();
    if (!(ev.minCoeff() > 1e-12 * std::max(1.0, ev.maxCoeff()))) {
      throw InitializationError("eigs_init: common lines of image " + std::to_string(i) + " are degenerate");
    }
    Dm12.block<2, 2>(2 * i, 2 * i) =
        ed.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * ed.eigenvectors().transpose();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(Dm12 * S * Dm12);
  if (es.info() != Eigen::Success) throw InitializationError("eigs_init: eigensolver did not converge");
  // Eigenvalues ascend; the last three columns span the dominant subspace.
  Matrix V = Dm12 * es.eigenvectors().rightCols(3);

  // V = W M for an unknown invertible 3x3 M. Fit A = (M^T M)^{-1} by least
  // squares on V_i A V_i^T = I_2 and undo M up to an orthogonal factor.
  Matrix LS(3 * N, 6);
  Eigen::VectorXd rhs(3 * N);
  const int idx[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  for (int i = 0; i < N; ++i) {
    const Matrix Vi = V.block(2 * i, 0, 2, 3);
    const int rc[3][2] = {{0, 0}, {0, 1}, {1, 1}};
    for (int e = 0; e < 3; ++e) {
      const int r = rc[e][0];
      const int c = rc[e][1];
      Eigen::Matrix<double, 1, 6> row = Eigen::Matrix<double, 1, 6>::Zero();
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) row(idx[a][b]) += Vi(r, a) * Vi(c, b);
      LS.row(3 * i + e) = row;
      rhs(3 * i + e) = r == c ? 1.0 : 0.0;
    }
  }
  const Eigen::Matrix<double, 6, 1> a = LS.colPivHouseholderQr().solve(rhs);
  Eigen::Matrix3d A;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) A(r, c) = a(idx[r][c]);
  Eigen::LLT<Eigen::Matrix3d> llt(A);
  // Noisy data can make A indefinite; the plain subspace is then rounded as is.
  if (llt.info() == Eigen::Success && A.allFinite()) V = V * llt.matrixL();

  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    const Matrix Bi = V.block(2 * i, 0, 2, 3).transpose();
    if (!Bi.allFinite() || Bi.norm() == 0.0) throw InitializationError("eigs_init: degenerate eigenvector block");
    Matrix P = polar(Bi);
    if (feasibility_residual(P) > 1e-10) P = qr_retract(P).value();
    blocks.push_back(std::move(P));
  }
  return ProductPoint::trusted(std::move(blocks));
}

Rotation complete_rotation(const Matrix& R) {
  if (R.rows() != 3 || R.cols() != 2) throw DimensionError("complete_rotation: expects a 3x2 block");
  Rotation out;
  out.col(0) = R.col(0);
  out.col(1) = R.col(1);
  out.col(2) = R.col(0).head<3>().cross(R.col(1).head<3>());
  if (out.determinant() < 0.0) out.col(2) = -out.col(2);
  return out;
}

std::vector<Rotation> complete_rotations(const ProductPoint& X) {
  std::vector<Rotation> out;
  out.reserve(X.size());
  for (const auto& b : X.blocks()) out.push_back(complete_rotation(b));
  return out;
}

double procrustes_mse(const std::vector<Rotation>& estimated, const std::vector<Rotation>& truth) {
  if (estimated.size() != truth.size()) throw ContractViolation("procrustes_mse: length mismatch");
  // argmin over O(3) of sum ||A_i - O B_i||^2 is O = U V^T from the SVD of
  // sum A_i B_i^T. The sum is then evaluated directly, which avoids the
  // cancellation of the closed form near zero.
  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < truth.size(); ++i) M += estimated[i] * truth[i].transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d O = svd.matrixU() * svd.matrixV().transpose();
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += (estimated[i] - O * truth[i]).squaredNorm();
  return s;
}

double procrustes_mse_any_handedness(const std::vector<Rotation>& estimated, const std::vector<Rotation>& truth) {
  std::vector<Rotation> mirrored = estimated;
  for (auto& R : mirrored) R.col(2) = -R.col(2);
  return std::min(procrustes_mse(estimated, truth), procrustes_mse(mirrored, truth));
}

void write_cryoem(std::ostream& out, const CryoEmInstance& inst) {
  out << "cryoem " << inst.N << " " << format_double(inst.q) << " " << format_double(inst.smoothing_eps) << " "
      << format_double(inst.corruption_prob) << "\n";
  for (const auto& R : inst.true_rotations) {
    out << "R";
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out << " " << format_double(R(r, c));
    out << "\n";
  }
  for (int i = 0; i < inst.N; ++i)
    for (int j = 0; j < inst.N; ++j)
      if (i != j) {
        out << "L " << i << " " << j << " " << format_double(inst.c(i, j)(0)) << " "
            << format_double(inst.c(i, j)(1)) << "\n";
      }
}

CryoEmInstance read_cryoem(std::istream& in) {
  CryoEmInstance inst;
  std::string line;
  std::size_t lineno = 0;
  std::size_t rot_seen = 0;
  bool header = false;
  std::vector<char> seen;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    std::string rest;
    if (tag == "cryoem") {
      if (header) throw ParseError(lineno, "duplicate header");
      if (!(ls >> inst.N >> inst.q >> inst.smoothing_eps >> inst.corruption_prob) || (ls >> rest) || inst.N < 2) {
        throw ParseError(lineno, "malformed header");
      }
      header = true;
      const auto NN = static_cast<std::size_t>(inst.N) * static_cast<std::size_t>(inst.N);
      inst.common_lines.assign(NN, Vec2::Zero());
      seen.assign(NN, 0);
    } else if (tag == "R") {
      if (!header) throw ParseError(lineno, "rotation before header");
      if (rot_seen >= static_cast<std::size_t>(inst.N)) throw ParseError(lineno, "too many rotations");
      Rotation R;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          if (!(ls >> R(r, c))) throw ParseError(lineno, "rotation needs 9 numbers");
      if (ls >> rest) throw ParseError(lineno, "trailing tokens");
      inst.true_rotations.push_back(R);
      ++rot_seen;
    } else if (tag == "L") {
      if (!header) throw ParseError(lineno, "common line before header");
      int i = -1, j = -1;
      Vec2 v;
      if (!(ls >> i >> j >> v(0) >> v(1)) || (ls >> rest)) throw ParseError(lineno, "malformed common line");
      if (i < 0 || j < 0 || i >= inst.N || j >= inst.N || i == j) throw ParseError(lineno, "index out of range");
      const auto idx = static_cast<std::size_t>(i * inst.N + j);
      if (seen[idx]) throw ParseError(lineno, "duplicate common line");
      seen[idx] = 1;
      inst.common_lines[idx] = v;
    } else {
      throw ParseError(lineno, "unknown record '" + tag + "'");
    }
  }
  if (!header) throw ParseError(lineno, "missing header");
  if (rot_seen != static_cast<std::size_t>(inst.N)) throw ParseError(lineno, "expected " + std::to_string(inst.N) + " rotations");
  for (int i = 0; i < inst.N; ++i)
    for (int j = 0; j < inst.N; ++j)
      if (i != j && !seen[static_cast<std::size_t>(i * inst.N + j)]) {
        throw ParseError(lineno, "missing common line " + std::to_string(i) + " " + std::to_string(j));
      }
  try {
    inst.validate();
  } catch (const ContractViolation& e) {
    throw ParseError(lineno, e.what());
  }
  return inst;
}

CryoEmInstance read_cryoem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open cryo-EM instance '" + path + "'");
  return read_cryoem(in);
}

}  // namespace iddm
