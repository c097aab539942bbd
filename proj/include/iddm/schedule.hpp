#pragma once

#include <utility>
#include <vector>

namespace iddm {

/// Rule producing the diffusion strength sigma_k for SDE step k.
///
/// - Constant:          sigma_0
/// - PiecewiseConstant: sigma_i on [S_i, S_i + T_i), S_1 = 0, S_{i+1} = S_i + T_i,
///                      zero after the last interval; t = k * dt
/// - PowerLaw:          alpha / ((k + 1) dt)^(1 / (2 (n_eff - 1)))
/// - CDD:               c / sqrt(log(k dt + 2))
class DiffusionSchedule {
 public:
  enum class Kind { Constant, PiecewiseConstant, PowerLaw, CDD };

  static DiffusionSchedule constant(double sigma0);
  /// Intervals given as (sigma_i, T_i); step length dt maps steps to time.
  static DiffusionSchedule piecewise(std::vector<std::pair<double, double>> intervals, double dt);
  /// Throws ConfigError if n_eff < 2 or dt <= 0.
  static DiffusionSchedule power_law(double alpha, double dt, int n_eff);
  static DiffusionSchedule cdd(double c, double dt);

  Kind kind() const noexcept { return kind_; }
  double sigma(long long step) const;

  /// True when every step yields sigma == 0.
  bool identically_zero() const noexcept;

  double amplitude() const noexcept { return amplitude_; }
  double dt() const noexcept { return dt_; }
  int n_eff() const noexcept { return n_eff_; }
  const std::vector<std::pair<double, double>>& intervals() const noexcept { return intervals_; }

 private:
  Kind kind_ = Kind::Constant;
  double amplitude_ = 0.0;
  double dt_ = 1.0;
  int n_eff_ = 2;
  std::vector<std::pair<double, double>> intervals_;
};

/// Free-function form of DiffusionSchedule::sigma.
inline double schedule_sigma(const DiffusionSchedule& s, long long step) { return s.sigma(step); }

}  // namespace iddm
