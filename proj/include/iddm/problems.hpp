#pragma once

// Benchmark objective families with analytic Euclidean gradients.

#include <vector>

#include "iddm/graph.hpp"
#include "iddm/problem.hpp"
#include "iddm/rng.hpp"

namespace iddm {

/// F(x) = sum_i x_i^6 + sum_{i<n} x_i^3 x_{i+1}^3 on the unit sphere in R^n.
Problem hp1_problem(int n);

enum class BiquadCase { I, II };

/// Coefficients b_ijkl of a 4-index tensor, stored with i fastest.
/// Symmetric under (i,j,k,l) -> (k,j,i,l) and (i,j,k,l) -> (i,l,k,j).
class BiquadTensor {
 public:
  BiquadTensor() = default;
  explicit BiquadTensor(int n);

  int n() const noexcept { return n_; }
  double& operator()(int i, int j, int k, int l) { return b_[index(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return b_[index(i, j, k, l)]; }
  /// Writes v to every index in the symmetry orbit of (i,j,k,l).
  void set_orbit(int i, int j, int k, int l, double v);
  bool is_symmetric() const;
  std::size_t count_nonzero() const;
  const std::vector<double>& data() const noexcept { return b_; }

 private:
  std::size_t index(int i, int j, int k, int l) const {
    const auto N = static_cast<std::size_t>(n_);
    return static_cast<std::size_t>(i) + N * (static_cast<std::size_t>(j) +
                                              N * (static_cast<std::size_t>(k) + N * static_cast<std::size_t>(l)));
  }
  int n_ = 0;
  std::vector<double> b_;
};

/// Case I: b = (-1)^(i+j+k+l) |c|, c ~ N(0,1).
/// Case II: b = |c1| 1{c2 > eta}, c1 ~ N(0,1), c2 ~ U(0,1).
/// One draw per symmetry orbit, so the symmetry holds exactly.
BiquadTensor biquad_make(int n, BiquadCase which, double eta, RngStream& rng);

/// b(x, y) = sum b_ijkl x_i y_j x_k y_l over x, y on the unit sphere; two blocks (n,1), (n,1).
Problem biquad_problem(BiquadTensor B);

/// Motzkin-Straus quartic sum x_i^4 + 2 sum_{(i,j) in E} x_i^2 x_j^2 on the unit sphere.
/// Its minimum is 1 / S(G) with S(G) the stability number.
Problem stability_problem(const Graph& g);

/// round(1 / best_objective). Throws ContractViolation unless best_objective > 0.
int stability_estimate(double best_objective);

}  // namespace iddm
