#include "iddm/problems.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "iddm/errors.hpp"

namespace iddm {

Problem hp1_problem(int n) {
  if (n < 2) throw ContractViolation("hp1_problem: need n >= 2");
  auto value = [n](const Matrix& X) {
    double f = 0.0;
    for (int i = 0; i < n; ++i) {
      const double xi3 = X(i, 0) * X(i, 0) * X(i, 0);
      f += xi3 * xi3;
      if (i + 1 < n) f += xi3 * X(i + 1, 0) * X(i + 1, 0) * X(i + 1, 0);
    }
    return f;
  };
  auto gradient = [n](const Matrix& X) {
    Matrix g(n, 1);
    for (int i = 0; i < n; ++i) {
      const double x = X(i, 0);
      const double x2 = x * x;
      double gi = 6.0 * x2 * x2 * x;
      if (i + 1 < n) gi += 3.0 * x2 * std::pow(X(i + 1, 0), 3);
      if (i > 0) gi += 3.0 * std::pow(X(i - 1, 0), 3) * x2;
      g(i, 0) = gi;
    }
    return g;
  };
  return single_block_problem("hp1", n, 1, value, gradient);
}

BiquadTensor::BiquadTensor(int n) : n_(n) {
  if (n < 1) throw ContractViolation("BiquadTensor: need n >= 1");
  const auto N = static_cast<std::size_t>(n);
  b_.assign(N * N * N * N, 0.0);
}

void BiquadTensor::set_orbit(int i, int j, int k, int l, double v) {
  (*this)(i, j, k, l) = v;
  (*this)(k, j, i, l) = v;
  (*this)(i, l, k, j) = v;
  (*this)(k, l, i, j) = v;
}

bool BiquadTensor::is_symmetric() const {
  for (int l = 0; l < n_; ++l)
    for (int k = 0; k < n_; ++k)
      for (int j = 0; j < n_; ++j)
        for (int i = 0; i < n_; ++i) {
          const double b = (*this)(i, j, k, l);
          if (b != (*this)(k, j, i, l) || b != (*this)(i, l, k, j)) return false;
        }
  return true;
}

std::size_t BiquadTensor::count_nonzero() const {
  return static_cast<std::size_t>(std::count_if(b_.begin(), b_.end(), [](double v) { return v != 0.0; }));
}

BiquadTensor biquad_make(int n, BiquadCase which, double eta, RngStream& rng) {
  if (n < 2) throw ContractViolation("biquad_make: need n >= 2");
  if (which == BiquadCase::II && !(eta > 0.0 && eta < 1.0)) {
    throw ContractViolation("biquad_make: case II needs 0 < eta < 1");
  }
  BiquadTensor B(n);
  // Orbit representatives: i <= k and j <= l.
  for (int i = 0; i < n; ++i)
    for (int k = i; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int l = j; l < n; ++l) {
          double v = 0.0;
          if (which == BiquadCase::I) {
            const double c = std::abs(rng.gaussian());
            v = ((i + j + k + l) % 2 == 0) ? c : -c;
          } else {
            const double c1 = std::abs(rng.gaussian());
            const double c2 = rng.uniform();
            v = c2 > eta ? c1 : 0.0;
          }
          B.set_orbit(i, j, k, l, v);
        }
  return B;
}

Problem biquad_problem(BiquadTensor B) {
  if (!B.is_symmetric()) throw ContractViolation("biquad_problem: tensor is not symmetric");
  const int n = B.n();
  auto T = std::make_shared<const BiquadTensor>(std::move(B));

  // M(y)_{ik} = sum_{j,l} b_ijkl y_j y_l, so b(x, y) = x^T M(y) x.
  auto contract_y = [T, n](const Matrix& y) {
    Matrix M = Matrix::Zero(n, n);
    for (int l = 0; l < n; ++l)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
          const double yjl = y(j, 0) * y(l, 0);
          for (int i = 0; i < n; ++i) M(i, k) += (*T)(i, j, k, l) * yjl;
        }
    return M;
  };
  // N(x)_{jl} = sum_{i,k} b_ijkl x_i x_k, so b(x, y) = y^T N(x) y.
  auto contract_x = [T, n](const Matrix& x) {
    Matrix M = Matrix::Zero(n, n);
    for (int l = 0; l < n; ++l)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int i = 0; i < n; ++i) s += (*T)(i, j, k, l) * x(i, 0);
          M(j, l) += s * x(k, 0);
        }
    return M;
  };

  Problem P;
  P.name = "biquad";
  P.block_dims = {{n, 1}, {n, 1}};
  P.value = [contract_y](std::span<const Matrix> X) {
    const Matrix& x = X[0];
    return (x.transpose() * contract_y(X[1]) * x)(0, 0);
  };
  P.euclidean_gradient = [contract_y, contract_x](std::span<const Matrix> X) {
    const Matrix& x = X[0];
    const Matrix& y = X[1];
    std::vector<Matrix> g(2);
    g[0] = 2.0 * contract_y(y) * x;
    g[1] = 2.0 * contract_x(x) * y;
    return g;
  };
  return P;
}

Problem stability_problem(const Graph& g) {
  const int m = g.num_vertices;
  if (m < 1) throw ContractViolation("stability_problem: graph has no vertices");
  auto adj = std::make_shared<const std::vector<std::vector<int>>>(g.adjacency());
  auto value = [m, adj](const Matrix& X) {
    double f = 0.0;
    for (int i = 0; i < m; ++i) {
      const double xi2 = X(i, 0) * X(i, 0);
      f += xi2 * xi2;
      for (int j : (*adj)[static_cast<std::size_t>(i)])
        if (j > i) f += 2.0 * xi2 * X(j, 0) * X(j, 0);
    }
    return f;
  };
  auto gradient = [m, adj](const Matrix& X) {
    Matrix G(m, 1);
    for (int i = 0; i < m; ++i) {
      const double x = X(i, 0);
      double s = 0.0;
      for (int j : (*adj)[static_cast<std::size_t>(i)]) s += X(j, 0) * X(j, 0);
      G(i, 0) = 4.0 * x * x * x + 4.0 * x * s;
    }
    return G;
  };
  return single_block_problem("stability", m, 1, value, gradient);
}

int stability_estimate(double best_objective) {
  if (!(best_objective > 0.0) || !std::isfinite(best_objective)) {
    throw ContractViolation("stability_estimate: objective must be positive and finite");
  }
  return static_cast<int>(std::lround(1.0 / best_objective));
}

}  // namespace iddm
