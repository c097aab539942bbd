#include "iddm/schedule.hpp"

#include <cmath>

#include "iddm/errors.hpp"

namespace iddm {

namespace {

void require_sigma(double s, const char* who) {
  if (!std::isfinite(s) || s < 0.0) throw ConfigError(std::string(who) + ": sigma must be finite and >= 0");
}

void require_dt(double dt, const char* who) {
  if (!std::isfinite(dt) || dt <= 0.0) throw ConfigError(std::string(who) + ": dt must be > 0");
}

}  // namespace

DiffusionSchedule DiffusionSchedule::constant(double sigma0) {
  require_sigma(sigma0, "constant schedule");
  DiffusionSchedule s;
  s.kind_ = Kind::Constant;
  s.amplitude_ = sigma0;
  return s;
}

DiffusionSchedule DiffusionSchedule::piecewise(std::vector<std::pair<double, double>> intervals, double dt) {
  require_dt(dt, "piecewise schedule");
  for (const auto& [sigma, len] : intervals) {
    require_sigma(sigma, "piecewise schedule");
    if (!std::isfinite(len) || len <= 0.0) throw ConfigError("piecewise schedule: interval lengths must be > 0");
  }
  DiffusionSchedule s;
  s.kind_ = Kind::PiecewiseConstant;
  s.dt_ = dt;
  s.intervals_ = std::move(intervals);
  return s;
}

DiffusionSchedule DiffusionSchedule::power_law(double alpha, double dt, int n_eff) {
  require_sigma(alpha, "power-law schedule");
  require_dt(dt, "power-law schedule");
  if (n_eff < 2) throw ConfigError("power-law schedule: n_eff must be >= 2 (exponent 1/(2(n-1)))");
  DiffusionSchedule s;
  s.kind_ = Kind::PowerLaw;
  s.amplitude_ = alpha;
  s.dt_ = dt;
  s.n_eff_ = n_eff;
  return s;
}

DiffusionSchedule DiffusionSchedule::cdd(double c, double dt) {
  require_sigma(c, "CDD schedule");
  require_dt(dt, "CDD schedule");
  DiffusionSchedule s;
  s.kind_ = Kind::CDD;
  s.amplitude_ = c;
  s.dt_ = dt;
  return s;
}

double DiffusionSchedule::sigma(long long step) const {
  if (step < 0) throw ContractViolation("schedule_sigma: step index must be >= 0");
  const double k = static_cast<double>(step);
  switch (kind_) {
    case Kind::Constant:
      return amplitude_;
    case Kind::PowerLaw:
      return amplitude_ / std::pow((k + 1.0) * dt_, 1.0 / (2.0 * (n_eff_ - 1)));
    case Kind::CDD:
      return amplitude_ / std::sqrt(std::log(k * dt_ + 2.0));
    case Kind::PiecewiseConstant: {
      const double t = k * dt_;
      double start = 0.0;
      for (const auto& [sigma, len] : intervals_) {
        if (t >= start && t < start + len) return sigma;
        start += len;
      }
      return 0.0;
    }
  }
  return 0.0;
}

bool DiffusionSchedule::identically_zero() const noexcept {
  if (kind_ == Kind::PiecewiseConstant) {
    for (const auto& iv : intervals_)
      if (iv.first != 0.0) return false;
    return true;
  }
  return amplitude_ == 0.0;
}

}  // namespace iddm
