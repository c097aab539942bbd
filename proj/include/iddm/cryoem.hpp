#pragma once

// Synthetic common-lines orientation estimation.
//
// Image i has an unknown rotation R_i in SO(3). The common line of images
// i and j is l = unit(R_i e3 x R_j e3); in the frame of image i it has
// in-plane coordinates c_ij = (R_i^T l)_{1:2}, and likewise c_ji in the
// frame of image j. Only the first two columns of each R_i are estimated.

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iddm/problem.hpp"
#include "iddm/rng.hpp"

namespace iddm {

using Rotation = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;

struct CryoEmInstance {
  int N = 0;
  std::vector<Rotation> true_rotations;
  /// c[i * N + j] for i != j; diagonal entries are unused zeros.
  std::vector<Vec2> common_lines;
  double corruption_prob = 0.0;
  double q = 0.5;
  double smoothing_eps = 1e-6;

  const Vec2& c(int i, int j) const { return common_lines[static_cast<std::size_t>(i * N + j)]; }
  /// Checks rotations and unit common lines; throws ContractViolation.
  void validate() const;
};

/// Haar-distributed rotation: QR of a Gaussian matrix, third column flipped if det < 0.
Rotation random_rotation(RngStream& rng);

/// Each unordered pair is replaced, with probability corruption_p, by two
/// independent uniform unit vectors. Nearly parallel viewing directions
/// (|cross| < 1e-8) are resampled.
CryoEmInstance cryoem_generate(int N, double corruption_p, RngStream& rng);

/// sum_{i<j} sum_l ((u_l - v_l)^2 + eps^2)^(q/2), u = R_i c_ij, v = R_j c_ji; N blocks of shape (3,2).
Problem cryoem_problem(const CryoEmInstance& inst);

/// Spectral initializer. Top three eigenvectors of D^-1/2 S D^-1/2, where S
/// has blocks c_ij c_ji^T and D_i = sum_j c_ij c_ij^T, mapped back by D^-1/2.
/// A least-squares fit of the 3x3 gauge that makes every block orthonormal is
/// applied through its Cholesky factor, then each 3x2 block is polar-rounded.
/// Exact on clean data. Throws InitializationError if a degree block is
/// singular or the eigensolver fails.
ProductPoint eigs_init(const CryoEmInstance& inst);

/// Appends the cross product of the two columns: an element of SO(3).
Rotation complete_rotation(const Matrix& R);
std::vector<Rotation> complete_rotations(const ProductPoint& X);

/// min over O in O(3) of sum_i ||Rhat_i - O R_i||_F^2 (closed form by SVD).
double procrustes_mse(const std::vector<Rotation>& estimated, const std::vector<Rotation>& truth);

/// Smaller of procrustes_mse for the estimate and for the estimate with
/// every third column negated. A 3x2 estimate is only determined up to
/// O(3), and completing a mirrored estimate yields O R J, J = diag(1,1,-1).
double procrustes_mse_any_handedness(const std::vector<Rotation>& estimated, const std::vector<Rotation>& truth);

/// Plain-text format, entries row-major:
///   cryoem N q eps corruption
///   R 9 numbers      (N lines)
///   L i j cx cy      (one line per ordered pair i != j, 0-based)
void write_cryoem(std::ostream& out, const CryoEmInstance& inst);
CryoEmInstance read_cryoem(std::istream& in);
CryoEmInstance read_cryoem_file(const std::string& path);

}  // namespace iddm
