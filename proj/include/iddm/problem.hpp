#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "iddm/manifold.hpp"

namespace iddm {

struct BlockDim {
  int n = 0;
  int p = 0;
  bool operator==(const BlockDim&) const = default;
};

/// Objective over a product of Stiefel blocks.
///
/// Both callbacks accept arbitrary matrices of the right shapes (not only
/// feasible ones) so that finite-difference checks can step off the manifold.
struct Problem {
  std::string name;
  std::vector<BlockDim> block_dims;
  std::function<double(std::span<const Matrix>)> value;
  std::function<std::vector<Matrix>(std::span<const Matrix>)> euclidean_gradient;

  double operator()(const ProductPoint& X) const { return value(X.blocks()); }
  std::vector<Matrix> gradient(const ProductPoint& X) const { return euclidean_gradient(X.blocks()); }

  /// Throws DimensionError unless X has exactly the declared block shapes.
  void check_shapes(const ProductPoint& X) const;
  bool single_block() const noexcept { return block_dims.size() == 1; }
};

/// Problem over a single block wrapping plain callbacks on that block.
Problem single_block_problem(std::string name, int n, int p, std::function<double(const Matrix&)> value,
                             std::function<Matrix(const Matrix&)> gradient);

}  // namespace iddm
