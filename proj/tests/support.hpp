#pragma once

// Shared helpers for the unit tests.

#include <cmath>
#include <vector>

#include "iddm/manifold.hpp"
#include "iddm/problem.hpp"
#include "iddm/rng.hpp"

namespace iddm::testing {

inline Matrix gaussian_matrix(int n, int p, RngStream& rng) {
  Matrix G(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) G(i, j) = rng.gaussian();
  return G;
}

inline Matrix random_skew(int n, RngStream& rng) {
  const Matrix G = gaussian_matrix(n, n, rng);
  return G - G.transpose();
}

/// x^T diag(d) x on the unit sphere.
inline Problem rayleigh_problem(std::vector<double> d) {
  const int n = static_cast<int>(d.size());
  Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(d.data(), n);
  return single_block_problem(
      "rayleigh", n, 1, [w](const Matrix& X) { return (w.array() * X.col(0).array().square()).sum(); },
      [w](const Matrix& X) { return Matrix(2.0 * (w.array() * X.col(0).array()).matrix()); });
}

/// Regularized lower incomplete gamma P(a, x) by series; used for chi-square p-values.
inline double chi2_survival(double stat, int dof) {
  const double a = 0.5 * dof;
  const double x = 0.5 * stat;
  double sum = 1.0 / a;
  double term = sum;
  for (int k = 1; k < 10000; ++k) {
    term *= x / (a + k);
    sum += term;
    if (term < sum * 1e-16) break;
  }
  const double lower = std::exp(-x + a * std::log(x) - std::lgamma(a)) * sum;
  return 1.0 - lower;
}

/// Pearson chi-square p-value of angles against the uniform law on [0, 2 pi).
inline double uniform_angle_pvalue(const std::vector<double>& angles, int bins) {
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (double a : angles) {
    double t = std::fmod(a, two_pi);
    if (t < 0) t += two_pi;
    auto b = static_cast<std::size_t>(t / two_pi * bins);
    if (b >= counts.size()) b = counts.size() - 1;
    counts[b] += 1.0;
  }
  const double expected = static_cast<double>(angles.size()) / bins;
  double stat = 0.0;
  for (double c : counts) stat += (c - expected) * (c - expected) / expected;
  return chi2_survival(stat, bins - 1);
}

}  // namespace iddm::testing
