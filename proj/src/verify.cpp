#include "iddm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iddm/cryoem.hpp"
#include "iddm/errors.hpp"
#include "iddm/local_solver.hpp"
#include "iddm/problems.hpp"
#include "iddm/sde.hpp"

namespace iddm {

namespace {

/// Running mean and variance.
struct Welford {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double std_error() const { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

StiefelPoint diffusion_step(const StiefelPoint& Y, double h, double sigma, RngStream& rng) {
  const auto n = static_cast<int>(Y.rows());
  const auto p = static_cast<int>(Y.cols());
  const Matrix dB = brownian_increment(n, p, h, rng);
  return sde_step(Y, Matrix::Zero(n, p), h, sigma, dB);
}

}  // namespace

TestFunction linear_test_function(Matrix C) {
  TestFunction f;
  f.value = [C](const Matrix& X) { return (C.array() * X.array()).sum(); };
  f.grad = [C](const Matrix&) { return C; };
  f.hess_apply = [](const Matrix&, int, int, int, int) { return 0.0; };
  return f;
}

TestFunction quadratic_test_function(Matrix H, double c) {
  if (H.rows() != H.cols()) throw DimensionError("quadratic_test_function: H must be square");
  if ((H - H.transpose()).norm() > 1e-14 * std::max(1.0, H.norm())) {
    throw ContractViolation("quadratic_test_function: H must be symmetric");
  }
  TestFunction f;
  f.value = [H, c](const Matrix& X) {
    const Eigen::Map<const Eigen::VectorXd> x(X.data(), X.size());
    return 0.5 * x.dot(H * x) + c;
  };
  f.grad = [H](const Matrix& X) {
    const Eigen::Map<const Eigen::VectorXd> x(X.data(), X.size());
    Eigen::VectorXd g = H * x;
    return Matrix(Eigen::Map<Matrix>(g.data(), X.rows(), X.cols()));
  };
  f.hess_apply = [H](const Matrix& X, int i, int j, int u, int v) {
    const auto n = static_cast<int>(X.rows());
    return H(i + n * j, u + n * v);
  };
  return f;
}

TestFunction frobenius_test_function() {
  TestFunction f;
  f.value = [](const Matrix& X) { return X.squaredNorm(); };
  f.grad = [](const Matrix& X) { return Matrix(2.0 * X); };
  f.hess_apply = [](const Matrix&, int i, int j, int u, int v) { return (i == u && j == v) ? 2.0 : 0.0; };
  return f;
}

double lb_apply(const TestFunction& f, const StiefelPoint& Xp) {
  const Matrix& X = Xp.value();
  const auto n = static_cast<int>(X.rows());
  const auto p = static_cast<int>(X.cols());
  double laplacian = 0.0;
  double cross = 0.0;
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) {
      laplacian += f.hess_apply(X, i, j, i, j);
      for (int v = 0; v < p; ++v)
        for (int u = 0; u < n; ++u) cross += X(i, v) * X(u, j) * f.hess_apply(X, i, j, u, v);
    }
  const Matrix G = f.grad(X);
  const double radial = static_cast<double>(n - 1) * (X.array() * G.array()).sum();
  return laplacian - cross - radial;
}

double mc_tolerance(double std_error, double h, double target) {
  return 3.0 * std_error + 5.0 * h * std::abs(target) + kRoundingFloor;
}

McResult generator_mc_check(const StiefelPoint& X0, const TestFunction& f, double h, long long num_samples,
                            const RngStream& rng) {
  if (num_samples < 2) throw ContractViolation("generator_mc_check: need at least 2 samples");
  const double phi0 = f.value(X0.value());
  Welford acc;
  for (long long s = 0; s < num_samples; ++s) {
    RngStream rs = rng.with_step(static_cast<std::uint64_t>(s));
    const StiefelPoint W = diffusion_step(X0, h, 1.0, rs);
    acc.add((f.value(W.value()) - phi0) / h);
  }
  McResult r;
  r.estimate = acc.mean;
  r.target = 0.5 * lb_apply(f, X0);
  r.std_error = acc.std_error();
  r.tolerance = mc_tolerance(r.std_error, h, r.target);
  r.zscore = r.std_error > 0.0 ? (r.estimate - r.target) / r.std_error : 0.0;
  r.passed = std::abs(r.estimate - r.target) <= r.tolerance;
  return r;
}

DriftResult ito_drift_check(const StiefelPoint& X0, double h, double sigma, long long num_samples,
                            const RngStream& rng, const VerifyHooks& hooks) {
  if (num_samples < 2) throw ContractViolation("ito_drift_check: need at least 2 samples");
  const Matrix& x0 = X0.value();
  const auto n = x0.rows();
  const auto p = x0.cols();
  std::vector<Welford> acc(static_cast<std::size_t>(n * p));
  for (long long s = 0; s < num_samples; ++s) {
    RngStream rs = rng.with_step(static_cast<std::uint64_t>(s));
    Matrix inc = diffusion_step(X0, h, sigma, rs).value() - x0;
    if (hooks.flip_drift_sign) inc = -inc;
    for (Eigen::Index k = 0; k < inc.size(); ++k) acc[static_cast<std::size_t>(k)].add(inc.data()[k]);
  }
  DriftResult r;
  r.mean_increment.resize(n, p);
  r.std_error.resize(n, p);
  r.target = -0.5 * static_cast<double>(n - 1) * sigma * sigma * h * x0;
  r.worst_excess = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n * p; ++k) {
    const auto& a = acc[static_cast<std::size_t>(k)];
    r.mean_increment.data()[k] = a.mean;
    r.std_error.data()[k] = a.std_error();
    const double t = r.target.data()[k];
    const double dev = std::abs(a.mean - t);
    if (a.std_error() > 0.0) r.max_zscore = std::max(r.max_zscore, dev / a.std_error());
    r.worst_excess = std::max(r.worst_excess, dev - mc_tolerance(a.std_error(), h, t));
  }
  r.passed = r.worst_excess <= 0.0;
  return r;
}

StrongOrderResult strong_order_check(const Problem& problem, const StiefelPoint& X0, double T, long long finest_K,
                                     int levels, int num_paths, double sigma, const RngStream& rng) {
  if (levels < 1 || finest_K < 1 || (finest_K % (1LL << levels)) != 0) {
    throw ContractViolation("strong_order_check: finest_K must be divisible by 2^levels");
  }
  if (!(T > 0.0) || num_paths < 1) throw ContractViolation("strong_order_check: need T > 0 and num_paths >= 1");
  if (!problem.single_block()) throw DimensionError("strong_order_check: single-block problems only");
  const auto n = static_cast<int>(X0.rows());
  const auto p = static_cast<int>(X0.cols());
  const double dt = T / static_cast<double>(finest_K);

  auto simulate = [&](const std::vector<Matrix>& dB, long long stride) {
    StiefelPoint Y = X0;
    const double delta = dt * static_cast<double>(stride);
    Matrix inc(n, p);
    for (long long k = 0; k < finest_K; k += stride) {
      const Matrix G = problem.euclidean_gradient(std::span<const Matrix>(&Y.value(), 1))[0];
      if (sigma != 0.0) {
        inc.setZero();
        for (long long r = 0; r < stride; ++r) inc += dB[static_cast<std::size_t>(k + r)];
      }
      Y = sde_step(Y, G, delta, sigma, inc);
    }
    return Y.value();
  };

  std::vector<double> sq(static_cast<std::size_t>(levels), 0.0);
  std::vector<Matrix> dB;
  for (int path = 0; path < num_paths; ++path) {
    dB.clear();
    if (sigma != 0.0) {
      RngStream rs = rng.with_step(static_cast<std::uint64_t>(path));
      dB.reserve(static_cast<std::size_t>(finest_K));
      for (long long k = 0; k < finest_K; ++k) dB.push_back(brownian_increment(n, p, dt, rs));
    }
    const Matrix fine = simulate(dB, 1);
    for (int l = 1; l <= levels; ++l) {
      const Matrix coarse = simulate(dB, 1LL << l);
      sq[static_cast<std::size_t>(l - 1)] += (fine - coarse).squaredNorm();
    }
  }

  StrongOrderResult out;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  bool any_zero = false;
  for (int l = 1; l <= levels; ++l) {
    const double delta = dt * static_cast<double>(1LL << l);
    const double rms = std::sqrt(sq[static_cast<std::size_t>(l - 1)] / num_paths);
    out.pairs.emplace_back(delta, rms);
    if (!(rms > 0.0)) {
      any_zero = true;
      continue;
    }
    // Against the finest path the leading error term scales with delta - dt, not delta.
    const double x = std::log(delta - dt);
    const double y = std::log(rms);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = levels;
  if (any_zero || levels < 2) {
    out.slope = std::numeric_limits<double>::quiet_NaN();
  } else {
    out.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }
  return out;
}

GibbsResult gibbs_circle_check(double c_height, double sigma, long long burn_in, long long num_samples,
                               const RngStream& rng, double dt) {
  if (!(sigma > 0.0)) throw ContractViolation("gibbs_circle_check: sigma must be > 0");
  if (num_samples < 1 || burn_in < 0) throw ContractViolation("gibbs_circle_check: bad sample counts");
  constexpr double pi = std::numbers::pi;
  const double width = 2.0 * pi / kGibbsBins;

  GibbsResult out;
  out.empirical.assign(kGibbsBins, 0.0);
  out.target.assign(kGibbsBins, 0.0);

  Matrix G(2, 1);
  G << c_height, 0.0;
  StiefelPoint Y = StiefelPoint::trusted((Matrix(2, 1) << 1.0, 0.0).finished());
  RngStream rs = rng;  // one stream for the whole chain
  std::vector<long long> counts(kGibbsBins, 0);
  for (long long k = 0; k < burn_in + num_samples; ++k) {
    const Matrix dB = brownian_increment(2, 1, dt, rs);
    Y = sde_step(Y, G, dt, sigma, dB);
    if ((k + 1) % kDriftCheckPeriod == 0 && feasibility_residual(Y.value()) > kDriftTol) Y = qr_retract(Y.value());
    if (k < burn_in) continue;
    const double theta = std::atan2(Y.value()(1, 0), Y.value()(0, 0));
    auto b = static_cast<long long>(std::floor((theta + pi) / width));
    b = std::clamp<long long>(b, 0, kGibbsBins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }

  // Composite Simpson per bin.
  const double beta = 2.0 * c_height / (sigma * sigma);
  constexpr int sub = 64;
  double total = 0.0;
  for (int b = 0; b < kGibbsBins; ++b) {
    const double a = -pi + b * width;
    const double hh = width / sub;
    double s = 0.0;
    for (int k = 0; k <= sub; ++k) {
      const double w = (k == 0 || k == sub) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      s += w * std::exp(-beta * std::cos(a + k * hh));
    }
    out.target[static_cast<std::size_t>(b)] = s * hh / 3.0;
    total += out.target[static_cast<std::size_t>(b)];
  }
  double tv = 0.0;
  double tvu = 0.0;
  for (int b = 0; b < kGibbsBins; ++b) {
    const auto i = static_cast<std::size_t>(b);
    out.target[i] /= total;
    out.empirical[i] = static_cast<double>(counts[i]) / static_cast<double>(num_samples);
    tv += std::abs(out.empirical[i] - out.target[i]);
    tvu += std::abs(out.empirical[i] - 1.0 / kGibbsBins);
  }
  out.tv_distance = 0.5 * tv;
  out.tv_to_uniform = 0.5 * tvu;
  return out;
}

double finite_diff_gradient_check(const Problem& problem, const ProductPoint& X, double h) {
  if (!(h >= 1e-8 && h <= 1e-4)) throw ContractViolation("finite_diff_gradient_check: h must lie in [1e-8, 1e-4]");
  problem.check_shapes(X);
  const std::vector<Matrix> G = problem.gradient(X);
  std::vector<Matrix> Y(X.blocks().begin(), X.blocks().end());
  double scale = 1e-8;
  for (const auto& g : G) scale = std::max(scale, g.cwiseAbs().maxCoeff());
  double worst = 0.0;
  for (std::size_t b = 0; b < Y.size(); ++b) {
    for (Eigen::Index k = 0; k < Y[b].size(); ++k) {
      const double orig = Y[b].data()[k];
      Y[b].data()[k] = orig + h;
      const double fp = problem.value(Y);
      Y[b].data()[k] = orig - h;
      const double fm = problem.value(Y);
      Y[b].data()[k] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - G[b].data()[k]));
    }
  }
  return worst / scale;
}

bool VerifyReport::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

std::string VerifyReport::to_json() const {
  nlohmann::ordered_json j;
  j["budget"] = budget == VerifyBudget::Quick ? "quick" : "full";
  j["passed"] = all_passed();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    nlohmann::ordered_json r;
    r["name"] = c.name;
    r["estimate"] = std::isfinite(c.estimate) ? nlohmann::ordered_json(c.estimate) : nlohmann::ordered_json(nullptr);
    r["target"] = c.target;
    r["tolerance"] = c.tolerance;
    r["passed"] = c.passed;
    r["detail"] = c.detail;
    arr.push_back(std::move(r));
  }
  j["checks"] = std::move(arr);
  return j.dump(2);
}

namespace {

struct Budget {
  long long mc_samples;
  long long finest_K;
  int levels;
  int paths;
  long long gibbs_samples;
  long long gibbs_burn;
  double gibbs_widen;  // multiplies the TV thresholds
};

Budget budget_for(VerifyBudget b) {
  if (b == VerifyBudget::Full) return {100000, 4096, 4, 200, 1000000, 10000, 1.0};
  return {20000, 2048, 4, 100, 200000, 10000, 2.0};
}

CheckRecord mc_record(std::string name, const McResult& r) {
  std::ostringstream d;
  d << "std_error=" << r.std_error << " zscore=" << r.zscore;
  return {std::move(name), r.estimate, r.target, r.tolerance, r.passed, d.str()};
}

StiefelPoint random_stiefel(int n, int p, RngStream& rng) { return random_point(n, p, rng); }

Matrix random_symmetric(int m, RngStream& rng) {
  Matrix A(m, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) A(i, j) = rng.gaussian();
  return 0.5 * (A + A.transpose());
}

}  // namespace

VerifyReport verify_all(VerifyBudget budget, std::uint64_t seed, const VerifyHooks& hooks) {
  const Budget B = budget_for(budget);
  VerifyReport rep;
  rep.budget = budget;
  RngStream setup(seed, {0, 0, 0}, StreamPurpose::Verification);
  auto mc_rng = [seed](std::uint64_t run) { return RngStream(seed, {run, 1, 0}, StreamPurpose::Verification); };

  // Laplace-Beltrami closed forms.
  {
    const StiefelPoint X = random_stiefel(5, 2, setup);
    const double v = lb_apply(frobenius_test_function(), X);
    rep.checks.push_back({"lb_constant_on_manifold", v, 0.0, 1e-10, std::abs(v) <= 1e-10, "phi = ||X||_F^2 on M(5,2)"});
    Matrix C(5, 2);
    for (Eigen::Index k = 0; k < C.size(); ++k) C.data()[k] = setup.gaussian();
    const double lv = lb_apply(linear_test_function(C), X);
    const double lt = -4.0 * (C.array() * X.value().array()).sum();
    rep.checks.push_back({"lb_linear", lv, lt, 1e-10, std::abs(lv - lt) <= 1e-10, "phi = tr(C^T X) on M(5,2)"});
  }

  // Generator identity.
  {
    const double h = 1e-3;
    const StiefelPoint X32 = random_stiefel(3, 2, setup);
    Matrix C(3, 2);
    for (Eigen::Index k = 0; k < C.size(); ++k) C.data()[k] = setup.gaussian();
    rep.checks.push_back(mc_record("generator_linear_M32",
                                   generator_mc_check(X32, linear_test_function(C), h, B.mc_samples, mc_rng(1))));
    rep.checks.push_back(mc_record(
        "generator_quadratic_M32",
        generator_mc_check(X32, quadratic_test_function(random_symmetric(6, setup)), h, B.mc_samples, mc_rng(2))));
    const McResult cst = generator_mc_check(X32, frobenius_test_function(), h, B.mc_samples, mc_rng(3));
    rep.checks.push_back(mc_record("generator_constant_M32", cst));
    const StiefelPoint X22 = random_stiefel(2, 2, setup);
    Matrix E = Matrix::Zero(2, 2);
    E(0, 0) = 1.0;
    rep.checks.push_back(
        mc_record("generator_linear_M22", generator_mc_check(X22, linear_test_function(E), h, B.mc_samples, mc_rng(4))));
  }

  // Ito drift and its sigma^2 scaling.
  {
    const double h = 1e-3;
    const StiefelPoint X31 = random_stiefel(3, 1, setup);
    const DriftResult d = ito_drift_check(X31, h, 1.0, B.mc_samples, mc_rng(5), hooks);
    double worst_ratio = 0.0;
    for (Eigen::Index k = 0; k < d.target.size(); ++k) {
      const double tol = mc_tolerance(d.std_error.data()[k], h, d.target.data()[k]);
      worst_ratio = std::max(worst_ratio, std::abs(d.mean_increment.data()[k] - d.target.data()[k]) / tol);
    }
    std::ostringstream det;
    det << "max |mean - target| / (3 SE + 5 h |target|) over entries; max_zscore=" << d.max_zscore;
    rep.checks.push_back({"ito_drift_M31", worst_ratio, 0.0, 1.0, d.passed, det.str()});

    // Radial parts <E[W - X0], X0> at sigma = 1 and 2 share the sample streams.
    auto radial = [&](double sigma) {
      Welford w;
      const RngStream r = mc_rng(6);
      for (long long s = 0; s < B.mc_samples; ++s) {
        RngStream rs = r.with_step(static_cast<std::uint64_t>(s));
        Matrix inc = diffusion_step(X31, h, sigma, rs).value() - X31.value();
        if (hooks.flip_drift_sign) inc = -inc;
        w.add((inc.array() * X31.value().array()).sum());
      }
      return w;
    };
    const Welford r1 = radial(1.0);
    const Welford r2 = radial(2.0);
    const double ratio = r2.mean / r1.mean;
    const double se = std::abs(ratio) * std::hypot(r1.std_error() / r1.mean, r2.std_error() / r2.mean);
    const double tol = 3.0 * se + 5.0 * (4.0 * h) * 4.0;
    rep.checks.push_back({"ito_drift_sigma_scaling", ratio, 4.0, tol, std::abs(ratio - 4.0) <= tol,
                          "ratio of radial drift at sigma = 2 and sigma = 1"});
  }

  // Strong order.
  {
    Problem zero = single_block_problem(
        "zero", 3, 2, [](const Matrix&) { return 0.0; }, [](const Matrix& X) { return Matrix(Matrix::Zero(X.rows(), X.cols())); });
    const StiefelPoint X32 = random_stiefel(3, 2, setup);
    const StrongOrderResult s = strong_order_check(zero, X32, 0.5, B.finest_K, B.levels, B.paths, 1.0, mc_rng(7));
    rep.checks.push_back({"strong_order_diffusion", s.slope, 0.55, 0.2, std::abs(s.slope - 0.55) <= 0.2,
                          "RMS error slope, pure diffusion on M(3,2)"});

    // Smooth deterministic drift: F(X) = tr(X^T A X) with A symmetric.
    const Matrix A = random_symmetric(3, setup);
    Problem quad = single_block_problem(
        "quadratic", 3, 2, [A](const Matrix& X) { return (X.transpose() * A * X).trace(); },
        [A](const Matrix& X) { return Matrix(2.0 * A * X); });
    const StrongOrderResult d = strong_order_check(quad, X32, 0.5, B.finest_K, B.levels, 1, 0.0, mc_rng(8));
    rep.checks.push_back({"strong_order_deterministic", d.slope, 1.0, 0.15, std::abs(d.slope - 1.0) <= 0.15,
                          "error slope of the drift-only scheme"});
  }

  // Gibbs stationarity on the circle.
  {
    const GibbsResult g0 = gibbs_circle_check(0.0, 1.0, B.gibbs_burn, B.gibbs_samples, mc_rng(9));
    rep.checks.push_back({"gibbs_uniform", g0.tv_distance, 0.0, 0.03 * B.gibbs_widen,
                          g0.tv_distance <= 0.03 * B.gibbs_widen, "c = 0, sigma = 1, TV over 72 bins"});
    const GibbsResult g1 = gibbs_circle_check(1.0, 1.0, B.gibbs_burn, B.gibbs_samples, mc_rng(10));
    rep.checks.push_back({"gibbs_tilted", g1.tv_distance, 0.0, 0.05 * B.gibbs_widen,
                          g1.tv_distance <= 0.05 * B.gibbs_widen, "c = 1, sigma = 1, TV over 72 bins"});
    const GibbsResult g10 = gibbs_circle_check(1.0, 10.0, B.gibbs_burn, B.gibbs_samples, mc_rng(11));
    rep.checks.push_back({"gibbs_flat_limit", g10.tv_to_uniform, 0.0, 0.04 * B.gibbs_widen,
                          g10.tv_to_uniform <= 0.04 * B.gibbs_widen, "c = 1, sigma = 10, TV to uniform"});
  }

  // Analytic gradients of every problem family.
  {
    const double tol = 1e-4;
    const int points = budget == VerifyBudget::Full ? 100 : 10;
    auto fd_check = [&](const std::string& name, const Problem& P) {
      double worst = 0.0;
      for (int k = 0; k < points; ++k) worst = std::max(worst, finite_diff_gradient_check(P, random_product_point(P.block_dims, setup), 1e-6));
      rep.checks.push_back({"gradient_" + name, worst, 0.0, tol, worst <= tol, std::to_string(points) + " random feasible points"});
    };
    fd_check("hp1", hp1_problem(10));
    fd_check("biquad", biquad_problem(biquad_make(6, BiquadCase::I, 0.5, setup)));
    fd_check("stability", stability_problem(petersen_graph()));
    fd_check("cryoem", cryoem_problem(cryoem_generate(5, 0.0, setup)));
  }
  return rep;
}

}  // namespace iddm
