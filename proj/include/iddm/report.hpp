#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "iddm/manifold.hpp"

namespace iddm {

/// One IDDM cycle or one RSlocal trial.
struct CycleRecord {
  int index = 0;
  /// Objective after the diffusion phase; NaN when no diffusion ran.
  double post_diffusion_objective = std::numeric_limits<double>::quiet_NaN();
  double post_local_objective = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  int local_iterations = 0;
  bool diverged = false;
};

struct RunReport {
  std::string algorithm;
  double best_objective = std::numeric_limits<double>::infinity();
  ProductPoint best_point;
  double initial_objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<CycleRecord> cycles;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::map<std::string, std::string> config;
};

}  // namespace iddm
