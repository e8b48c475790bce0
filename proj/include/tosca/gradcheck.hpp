#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tosca/luca.hpp"

namespace tosca {

struct GradCheckOptions {
  std::size_t trials = 20;
  std::size_t max_d = 16;
  std::size_t max_r = 4;
  double step = 1e-5;
  /// Inputs whose relu pre-activations fall within this distance of zero are
  /// resampled, since a central difference would straddle the kink.
  double kink_margin = 1e-3;
  std::uint64_t seed = 7;
};

struct GradCheckTrial {
  std::size_t d = 0;
  std::size_t r = 0;
  LucaConfig config;
  double max_rel_error = 0.0;
};

struct GradCheckResult {
  std::vector<GradCheckTrial> trials;
  double max_rel_error = 0.0;
};

/// Denominator floor for relative_error. Central differences at h = 1e-5 carry
/// about 1e-10 of round-off, so entries near zero are compared absolutely.
constexpr double kRelErrorFloor = 1e-4;

/// |a - b| / max(|a|, |b|, kRelErrorFloor).
double relative_error(double analytic, double numeric);

/// Compares luca_backward against central differences of dot(upstream,
/// luca_forward) on random double-precision modules, cycling through every
/// activation / residual / order configuration.
GradCheckResult run_gradcheck(const GradCheckOptions& opts);

/// All 36 combinations of adapter activation, gate activation, gate_residual
/// and reversed.
std::vector<LucaConfig> all_luca_configs();

}  // namespace tosca
