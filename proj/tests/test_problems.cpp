#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>

#include "iddm/cryoem.hpp"
#include "iddm/driver.hpp"
#include "iddm/errors.hpp"
#include "iddm/graph.hpp"
#include "iddm/local_solver.hpp"
#include "iddm/problems.hpp"
#include "iddm/verify.hpp"
#include "support.hpp"

using namespace iddm;

namespace {

ProductPoint random_start(const Problem& P, RngStream& rng) { return random_product_point(P.block_dims, rng); }

// Exact maximum independent set by branch and bound on 64-bit vertex masks.
struct MisSearch {
  std::vector<std::uint64_t> nbr;
  int best = 0;
  std::uint64_t best_set = 0;

  void run(std::uint64_t cand, std::uint64_t chosen, int size) {
    if (cand == 0) {
      if (size > best) {
        best = size;
        best_set = chosen;
      }
      return;
    }
    if (size + std::popcount(cand) <= best) return;
    const int v = std::countr_zero(cand);
    const std::uint64_t bit = std::uint64_t{1} << v;
    run(cand & ~bit & ~nbr[static_cast<std::size_t>(v)], chosen | bit, size + 1);
    run(cand & ~bit, chosen, size);
  }
};

MisSearch max_independent_set(const Graph& g) {
  REQUIRE(g.num_vertices <= 64);
  MisSearch s;
  s.nbr.assign(static_cast<std::size_t>(g.num_vertices), 0);
  for (auto [u, v] : g.edges) {
    s.nbr[static_cast<std::size_t>(u - 1)] |= std::uint64_t{1} << (v - 1);
    s.nbr[static_cast<std::size_t>(v - 1)] |= std::uint64_t{1} << (u - 1);
  }
  const std::uint64_t all = g.num_vertices == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << g.num_vertices) - 1;
  s.run(all, 0, 0);
  return s;
}

Rotation axis_angle(const Eigen::Vector3d& w) {
  const double t = w.norm();
  if (t == 0.0) return Rotation::Identity();
  return Eigen::AngleAxisd(t, w / t).toRotationMatrix();
}

}  // namespace

TEST_CASE("hp1 values") {
  const Problem P = hp1_problem(6);
  Matrix e1 = Matrix::Zero(6, 1);
  e1(0, 0) = 1.0;
  CHECK(P(ProductPoint(std::vector<Matrix>{e1})) == 1.0);
  for (int n : {3, 6, 11}) {
    const Problem Q = hp1_problem(n);
    const Matrix u = Matrix::Constant(n, 1, 1.0 / std::sqrt(n));
    const double expect = (2.0 * n - 1.0) / (static_cast<double>(n) * n * n);
    CHECK(Q(ProductPoint(std::vector<Matrix>{u})) == doctest::Approx(expect).epsilon(1e-13));
  }
  CHECK_THROWS_AS(hp1_problem(1), ContractViolation);
}

TEST_CASE("hp1 n=2 global minimum agrees with a dense grid") {
  const Problem P = hp1_problem(2);
  double grid_min = 1e300;
  const int M = 1000000;
  for (int k = 0; k < M; ++k) {
    const double t = 2.0 * std::numbers::pi * k / M;
    const double x = std::cos(t);
    const double y = std::sin(t);
    grid_min = std::min(grid_min, std::pow(x, 6) + std::pow(y, 6) + std::pow(x * y, 3));
  }
  IddmConfig c;
  c.sde.dt = 0.1;
  c.sde.num_steps = 100;
  c.sde.schedule = DiffusionSchedule::power_law(0.5, 0.1, 2);
  RngStream init(3);
  const RunReport r = iddm_run(P, random_start(P, init), c, RngStream(4, {}, StreamPurpose::Diffusion));
  CHECK(std::abs(r.best_objective - grid_min) <= 1e-6);
}

TEST_CASE("biquadratic tensors") {
  RngStream rng(31);
  SUBCASE("case I signs and exact symmetry") {
    const BiquadTensor B = biquad_make(6, BiquadCase::I, 0.5, rng);
    CHECK(B.is_symmetric());
    RngStream pick(32);
    for (int t = 0; t < 1000; ++t) {
      const int i = static_cast<int>(pick.uniform() * 6);
      const int j = static_cast<int>(pick.uniform() * 6);
      const int k = static_cast<int>(pick.uniform() * 6);
      const int l = static_cast<int>(pick.uniform() * 6);
      CHECK(B(i, j, k, l) == B(k, j, i, l));
      CHECK(B(i, j, k, l) == B(i, l, k, j));
      const double v = B(i, j, k, l);
      if (v != 0.0) CHECK((v > 0.0) == ((i + j + k + l) % 2 == 0));
    }
  }
  SUBCASE("case II sparsity follows the Bernoulli count") {
    const int n = 10;
    const BiquadTensor B = biquad_make(n, BiquadCase::II, 0.999, rng);
    CHECK(B.is_symmetric());
    // One draw per orbit representative i <= k, j <= l.
    int nonzero = 0;
    for (int i = 0; i < n; ++i)
      for (int k = i; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int l = j; l < n; ++l) nonzero += B(i, j, k, l) != 0.0 ? 1 : 0;
    const double draws = (n * (n + 1) / 2.0) * (n * (n + 1) / 2.0);
    const double mean = draws * 0.001;
    const double sd = std::sqrt(draws * 0.001 * 0.999);
    CHECK(std::abs(nonzero - mean) <= 3.0 * sd);

    // eta near 1: about 3e-6 expected nonzero draws.
    const BiquadTensor Z = biquad_make(n, BiquadCase::II, 1.0 - 1e-9, rng);
    CHECK(Z.count_nonzero() == 0);
    CHECK_THROWS_AS(biquad_make(n, BiquadCase::II, 1.0, rng), ContractViolation);
  }
  SUBCASE("single orbit value") {
    BiquadTensor B(3);
    B.set_orbit(0, 0, 0, 0, 1.0);
    CHECK(B.count_nonzero() == 1);
    const Problem P = biquad_problem(B);
    Matrix e1 = Matrix::Zero(3, 1);
    e1(0, 0) = 1.0;
    CHECK(P(ProductPoint(std::vector<Matrix>{e1, e1})) == 1.0);
  }
  SUBCASE("gradient and sign invariance") {
    const Problem P = biquad_problem(biquad_make(7, BiquadCase::I, 0.5, rng));
    for (int t = 0; t < 20; ++t) {
      const ProductPoint X = random_start(P, rng);
      CHECK(finite_diff_gradient_check(P, X, 1e-6) <= 1e-5);
      const ProductPoint Y = ProductPoint::trusted({-X.block(0), -X.block(1)});
      const ProductPoint Z = ProductPoint::trusted({-X.block(0), X.block(1)});
      CHECK(std::abs(P(X) - P(Y)) <= 1e-12);
      CHECK(std::abs(P(X) - P(Z)) <= 1e-12);
    }
  }
}

TEST_CASE("hp1 and stability objectives are even") {
  RngStream rng(33);
  for (const Problem& P : {hp1_problem(9), stability_problem(petersen_graph())}) {
    for (int t = 0; t < 20; ++t) {
      const ProductPoint X = random_start(P, rng);
      CHECK(std::abs(P(X) - P(ProductPoint::trusted({-X.block(0)}))) <= 1e-12);
      CHECK(finite_diff_gradient_check(P, X, 1e-6) <= 1e-4);
    }
  }
}

TEST_CASE("graph generators") {
  const Graph c5 = cycle_graph(5);
  CHECK(c5.num_vertices == 5);
  CHECK(c5.edges.size() == 5);

  const Graph pg = petersen_graph();
  CHECK(pg.num_vertices == 10);
  CHECK(pg.edges.size() == 15);
  for (const auto& adj : pg.adjacency()) CHECK(adj.size() == 3);

  CHECK(complete_graph(6).edges.size() == 15);
  CHECK(empty_graph(4).edges.empty());

  const Graph h = hamming_graph(6, 4);
  CHECK(h.num_vertices == 64);
  // Strings within distance 1..3: 6 + 15 + 20 neighbours each.
  for (const auto& adj : h.adjacency()) CHECK(adj.size() == 41);

  CHECK(graph_from_spec("cycle:7").edges.size() == 7);
  CHECK(graph_from_spec("hamming:6:4").num_vertices == 64);
  CHECK_THROWS_AS(graph_from_spec("cycle"), ConfigError);
  CHECK_THROWS_AS(graph_from_spec("wheel:5"), ConfigError);
  CHECK_THROWS_AS(graph_from_spec("cycle:x"), ConfigError);
}

TEST_CASE("exact independence numbers") {
  CHECK(max_independent_set(cycle_graph(5)).best == 2);
  CHECK(max_independent_set(petersen_graph()).best == 4);
  CHECK(max_independent_set(complete_graph(7)).best == 1);
  CHECK(max_independent_set(empty_graph(6)).best == 6);
  CHECK(max_independent_set(hamming_graph(6, 4)).best == 4);
}

TEST_CASE("Motzkin-Straus value at the uniform vector over a maximum independent set") {
  for (const Graph& g : {cycle_graph(5), petersen_graph(), complete_graph(5), empty_graph(7), hamming_graph(6, 4)}) {
    const MisSearch s = max_independent_set(g);
    Matrix x = Matrix::Zero(g.num_vertices, 1);
    for (int v = 0; v < g.num_vertices; ++v)
      if ((s.best_set >> v) & 1U) x(v, 0) = 1.0 / std::sqrt(s.best);
    const Problem P = stability_problem(g);
    CHECK(P(ProductPoint::trusted({x})) == doctest::Approx(1.0 / s.best).epsilon(1e-15));
  }
}

TEST_CASE("stability objective extremes") {
  RngStream rng(34);
  const Problem K = stability_problem(complete_graph(6));
  for (int t = 0; t < 10; ++t) CHECK(std::abs(K(random_start(K, rng)) - 1.0) <= 1e-14);

  const Problem E = stability_problem(empty_graph(6));
  const RunReport re = rslocal_run(E, 5, {}, RngStream(1, {}, StreamPurpose::InitialPoint));
  CHECK(std::abs(re.best_objective - 1.0 / 6.0) <= 1e-10);

  const Problem C = stability_problem(cycle_graph(5));
  const RunReport rc = rslocal_run(C, 20, {}, RngStream(2, {}, StreamPurpose::InitialPoint));
  CHECK(std::abs(rc.best_objective - 0.5) <= 1e-10);
  CHECK(stability_estimate(rc.best_objective) == 2);
}

TEST_CASE("stability_estimate") {
  CHECK(stability_estimate(0.25) == 4);
  CHECK(stability_estimate(0.5) == 2);
  CHECK(stability_estimate(1.0 / 41.2) == 41);
  CHECK_THROWS_AS(stability_estimate(0.0), ContractViolation);
  CHECK_THROWS_AS(stability_estimate(std::nan("")), ContractViolation);
}

TEST_CASE("DIMACS parsing") {
  const Graph g = parse_dimacs_string("c tiny\np edge 3 2\ne 1 2\ne 2 3\n");
  CHECK(g.num_vertices == 3);
  CHECK(g.edges == std::vector<std::pair<int, int>>{{1, 2}, {2, 3}});

  const Graph d = parse_dimacs_string("p edge 2 2\ne 1 2\ne 2 1\n");
  CHECK(d.edges.size() == 1);
  CHECK(parse_dimacs_string("p col 4 1\ne 4 1\n").has_edge(1, 4));

  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_dimacs_string(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("p edge 3 1\ne 1 4\n") == 2);
  CHECK(line_of("c x\nc y\np edge 3 1\ne 2 2\n") == 4);
  CHECK(line_of("e 1 2\np edge 3 1\n") == 1);
  CHECK(line_of("p edge 3 1\np edge 3 1\n") == 2);
  CHECK(line_of("p edge 3 1\ne 1\n") == 2);
  CHECK(line_of("p edge 3 1\nx 1 2\n") == 2);
  CHECK_THROWS_AS(parse_dimacs_string("c only comments\n"), ParseError);

  std::ostringstream os;
  write_dimacs(os, petersen_graph(), "petersen");
  const Graph back = parse_dimacs_string(os.str());
  CHECK(back.num_vertices == 10);
  CHECK(back.edges == petersen_graph().edges);
}

TEST_CASE("cryo-EM common lines by hand") {
  // R_i = I, R_j = 90 degrees about x: R_j e3 = (0,-1,0), unit cross = e1.
  Rotation Rj;
  Rj << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  const Eigen::Vector3d l = Rotation::Identity().col(2).cross(Rj.col(2)).normalized();
  CHECK((l - Eigen::Vector3d(1, 0, 0)).norm() <= 1e-15);
  CHECK(((Rj.transpose() * l).head<2>() - Vec2(1, 0)).norm() <= 1e-15);
}

TEST_CASE("cryo-EM generation") {
  RngStream rng(35);
  const CryoEmInstance inst = cryoem_generate(12, 0.0, rng);
  CHECK_NOTHROW(inst.validate());
  for (int i = 0; i < 12; ++i) {
    const Rotation& R = inst.true_rotations[static_cast<std::size_t>(i)];
    CHECK((R.transpose() * R - Rotation::Identity()).norm() <= 1e-10);
    CHECK(std::abs(R.determinant() - 1.0) <= 1e-10);
    for (int j = 0; j < 12; ++j) {
      if (i == j) continue;
      const Rotation& Q = inst.true_rotations[static_cast<std::size_t>(j)];
      // Both lines of a pair use the cross product in increasing index order.
      const Eigen::Vector3d l = (i < j ? R.col(2).cross(Q.col(2)) : Q.col(2).cross(R.col(2))).normalized();
      CHECK((R.leftCols<2>() * inst.c(i, j) - l).norm() <= 1e-12);
    }
  }

  // Fully corrupted lines are uniform on the circle.
  RngStream rng2(36);
  const CryoEmInstance bad = cryoem_generate(101, 1.0, rng2);
  std::vector<double> angles;
  for (int i = 0; i < 101 && angles.size() < 10000; ++i)
    for (int j = 0; j < 101 && angles.size() < 10000; ++j)
      if (i != j) angles.push_back(std::atan2(bad.c(i, j)(1), bad.c(i, j)(0)));
  CHECK(angles.size() == 10000);
  CHECK(iddm::testing::uniform_angle_pvalue(angles, 36) > 0.01);

  CHECK_THROWS_AS(cryoem_generate(1, 0.0, rng), ContractViolation);
  CHECK_THROWS_AS(cryoem_generate(5, 1.5, rng), ContractViolation);
}

TEST_CASE("cryo-EM objective") {
  RngStream rng(37);
  const CryoEmInstance inst = cryoem_generate(9, 0.0, rng);
  const Problem P = cryoem_problem(inst);
  std::vector<Matrix> truth;
  for (const auto& R : inst.true_rotations) truth.push_back(R.leftCols(2));
  const double pairs = 9.0 * 8.0 / 2.0;
  const double floor = 3.0 * pairs * std::pow(inst.smoothing_eps, inst.q);
  CHECK(P(ProductPoint(truth)) <= floor + 1e-12);

  // The coordinate-wise distance is unchanged by signed permutations.
  Rotation O;
  O << 0, -1, 0, 0, 0, 1, -1, 0, 0;
  REQUIRE(O.determinant() == doctest::Approx(1.0));
  RngStream r2(38);
  const ProductPoint X = random_product_point(P.block_dims, r2);
  std::vector<Matrix> rotated;
  for (const auto& b : X.blocks()) rotated.push_back(O * b);
  CHECK(std::abs(P(X) - P(ProductPoint::trusted(rotated))) <= 1e-10);

  // A general global rotation keeps every residual at zero, so rotated truth
  // still sits at the smoothing floor.
  const Rotation G = random_rotation(rng);
  std::vector<Matrix> moved;
  for (const auto& b : truth) moved.push_back(G * b);
  CHECK(P(ProductPoint(moved)) <= floor + 1e-12);

  RngStream r3(39);
  const Problem small = cryoem_problem(cryoem_generate(5, 0.0, r3));
  for (int t = 0; t < 20; ++t) CHECK(finite_diff_gradient_check(small, random_product_point(small.block_dims, r3), 1e-6) <= 1e-4);
}

TEST_CASE("eigs initializer") {
  RngStream rng(40);
  SUBCASE("clean data") {
    const CryoEmInstance inst = cryoem_generate(20, 0.0, rng);
    const ProductPoint X = eigs_init(inst);
    CHECK(X.max_feasibility_residual() <= 1e-10);
    CHECK(procrustes_mse_any_handedness(complete_rotations(X), inst.true_rotations) <= 1e-2);
  }
  SUBCASE("fully corrupted data") {
    const CryoEmInstance inst = cryoem_generate(20, 1.0, rng);
    const ProductPoint X = eigs_init(inst);
    CHECK(X.max_feasibility_residual() <= 1e-10);
    const double mse = procrustes_mse_any_handedness(complete_rotations(X), inst.true_rotations);
    CHECK(mse > 1.0);
    CHECK(std::isfinite(mse));
  }
  SUBCASE("needs three images") {
    CHECK_THROWS_AS(eigs_init(cryoem_generate(2, 0.0, rng)), ContractViolation);
  }
}

TEST_CASE("complete_rotation") {
  CHECK((complete_rotation(Matrix::Identity(3, 2)) - Rotation::Identity()).norm() == 0.0);
  Matrix b(3, 2);
  b << 1, 0, 0, 0, 0, 1;
  const Rotation R = complete_rotation(b);
  CHECK((R.col(2) - Eigen::Vector3d(0, -1, 0)).norm() == 0.0);
  CHECK(R.determinant() == doctest::Approx(1.0));
  RngStream rng(41);
  for (int t = 0; t < 20; ++t) {
    const Rotation Q = complete_rotation(random_point(3, 2, rng).value());
    CHECK((Q.transpose() * Q - Rotation::Identity()).norm() <= 1e-10);
    CHECK(std::abs(Q.determinant() - 1.0) <= 1e-10);
  }
}

TEST_CASE("Procrustes MSE") {
  RngStream rng(42);
  std::vector<Rotation> truth;
  for (int i = 0; i < 6; ++i) truth.push_back(random_rotation(rng));
  CHECK(procrustes_mse(truth, truth) <= 1e-28);

  const Rotation O0 = random_rotation(rng);
  std::vector<Rotation> moved;
  for (const auto& R : truth) moved.push_back(O0 * R);
  CHECK(procrustes_mse(moved, truth) <= 1e-28);
  CHECK_THROWS_AS(procrustes_mse(moved, {truth[0]}), ContractViolation);

  SUBCASE("matches a grid search near the optimum") {
    // Two images, the second perturbed by 0.01 rad. The optimum lies within
    // 0.01 of O0, so a 100^3 grid of axis-angle offsets on [-0.02, 0.02]^3
    // around O0 brackets it with spacing 4e-4.
    const std::vector<Rotation> tr = {truth[0], truth[1]};
    const Rotation pert = axis_angle(Eigen::Vector3d(0.0, 0.01, 0.0));
    const std::vector<Rotation> est = {O0 * tr[0], O0 * tr[1] * pert};
    const double closed = procrustes_mse(est, tr);
    double grid = 1e300;
    const int M = 100;
    for (int a = 0; a < M; ++a)
      for (int b2 = 0; b2 < M; ++b2)
        for (int c = 0; c < M; ++c) {
          const Eigen::Vector3d w(-0.02 + 0.04 * a / (M - 1), -0.02 + 0.04 * b2 / (M - 1), -0.02 + 0.04 * c / (M - 1));
          const Rotation O = axis_angle(w) * O0;
          grid = std::min(grid, (est[0] - O * tr[0]).squaredNorm() + (est[1] - O * tr[1]).squaredNorm());
        }
    CHECK(closed <= grid + 1e-12);
    CHECK(std::abs(closed - grid) <= 1e-6);
  }
  SUBCASE("mirrored estimates are resolved") {
    std::vector<Rotation> mirrored;
    const Rotation J = Eigen::Vector3d(1, 1, -1).asDiagonal();
    for (const auto& R : moved) mirrored.push_back(J * R * J);
    CHECK(procrustes_mse_any_handedness(mirrored, truth) <= 1e-26);
  }
}

TEST_CASE("cryo-EM text round trip") {
  RngStream rng(43);
  const CryoEmInstance inst = cryoem_generate(6, 0.3, rng);
  std::ostringstream os;
  write_cryoem(os, inst);
  std::istringstream is(os.str());
  const CryoEmInstance back = read_cryoem(is);
  CHECK(back.N == 6);
  CHECK(back.corruption_prob == inst.corruption_prob);
  for (std::size_t i = 0; i < inst.true_rotations.size(); ++i) CHECK(back.true_rotations[i] == inst.true_rotations[i]);
  CHECK(back.common_lines == inst.common_lines);

  std::istringstream broken("cryoem 3 0.5 1e-6 0\nR 1 0 0 0 1 0 0 0 1\nL 0 1 1\n");
  CHECK_THROWS_AS(read_cryoem(broken), ParseError);
}
