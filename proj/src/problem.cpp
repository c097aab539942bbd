#include "iddm/problem.hpp"

#include "iddm/errors.hpp"

namespace iddm {

void Problem::check_shapes(const ProductPoint& X) const {
  if (X.size() != block_dims.size()) {
    throw DimensionError(name + ": expected " + std::to_string(block_dims.size()) + " blocks, got " +
                         std::to_string(X.size()));
  }
  for (std::size_t i = 0; i < X.size(); ++i) {
    const auto& b = X.block(i);
    if (b.rows() != block_dims[i].n || b.cols() != block_dims[i].p) {
      throw DimensionError(name + ": block " + std::to_string(i) + " has shape " + std::to_string(b.rows()) +
                           "x" + std::to_string(b.cols()) + ", expected " + std::to_string(block_dims[i].n) +
                           "x" + std::to_string(block_dims[i].p));
    }
  }
}

Problem single_block_problem(std::string name, int n, int p, std::function<double(const Matrix&)> value,
                             std::function<Matrix(const Matrix&)> gradient) {
  Problem prob;
  prob.name = std::move(name);
  prob.block_dims = {{n, p}};
  prob.value = [value](std::span<const Matrix> X) { return value(X[0]); };
  prob.euclidean_gradient = [gradient](std::span<const Matrix> X) { return std::vector<Matrix>{gradient(X[0])}; };
  return prob;
}

}  // namespace iddm
