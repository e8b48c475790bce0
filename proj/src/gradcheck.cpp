#include "tosca/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tosca/rng.hpp"

namespace tosca {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / scale;
}

std::vector<LucaConfig> all_luca_configs() {
  std::vector<LucaConfig> out;
  for (Activation a : {Activation::relu, Activation::gelu, Activation::sigmoid}) {
    for (Activation g : {Activation::relu, Activation::gelu, Activation::sigmoid}) {
      for (bool residual : {false, true}) {
        for (bool reversed : {false, true}) out.push_back(LucaConfig{a, g, residual, reversed});
      }
    }
  }
  return out;
}

namespace {

using Module64 = BasicLucaModule<double>;

double objective(std::span<const double> z, const Module64& m, std::span<const double> upstream) {
  const auto out = luca_forward(z, m);
  return dot(out, upstream);
}

double min_abs(const std::vector<double>& v) {
  double best = INFINITY;
  for (double x : v) best = std::min(best, std::abs(x));
  return best;
}

// True when some relu pre-activation sits too close to its kink.
bool near_kink(std::span<const double> z, const Module64& m, double margin) {
  const bool adapter_relu = m.config.adapter_act == Activation::relu;
  const bool gate_relu = m.config.gate_act == Activation::relu;
  if (!adapter_relu && !gate_relu) return false;
  std::vector<double> adapter_in(z.begin(), z.end());
  std::vector<double> gate_in(z.begin(), z.end());
  if (m.config.reversed) {
    adapter_in = calibrator_forward(z, m);
  } else {
    gate_in = adapter_forward(z, m);
  }
  if (adapter_relu && min_abs(row_times(std::span<const double>(adapter_in), m.w_down)) < margin) return true;
  if (gate_relu && min_abs(row_times(std::span<const double>(gate_in), m.v_down)) < margin) return true;
  return false;
}

double check_matrix(Matrix<double>& param, const Matrix<double>& analytic, std::span<const double> z,
                    Module64& m, std::span<const double> upstream, double h) {
  double worst = 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param.values[i];
    param.values[i] = saved + h;
    const double plus = objective(z, m, upstream);
    param.values[i] = saved - h;
    const double minus = objective(z, m, upstream);
    param.values[i] = saved;
    worst = std::max(worst, relative_error(analytic.values[i], (plus - minus) / (2.0 * h)));
  }
  return worst;
}

// Activation pair cycles with period 9 and the residual/order flags with
// period 4, so any 20 consecutive trials cover every pair and every flag combo.
LucaConfig trial_config(std::size_t t) {
  static constexpr Activation kinds[] = {Activation::relu, Activation::gelu, Activation::sigmoid};
  const std::size_t pair = t % 9, flags = t % 4;
  return LucaConfig{kinds[pair / 3], kinds[pair % 3], (flags & 1) != 0, (flags & 2) != 0};
}

}  // namespace

GradCheckResult run_gradcheck(const GradCheckOptions& opts) {
  Rng rng(opts.seed);
  GradCheckResult result;
  for (std::size_t t = 0; t < opts.trials; ++t) {
    const std::size_t d = 1 + rng.below(opts.max_d);
    const std::size_t r = 1 + rng.below(opts.max_r);
    Module64 m(d, r, trial_config(t));
    std::vector<double> z(d), upstream(d);
    do {
      for (auto* mat : {&m.w_down, &m.w_up, &m.v_down, &m.v_up}) {
        for (double& v : mat->values) v = rng.normal(0.0, 0.5);
      }
      for (double& v : z) v = rng.normal();
    } while (near_kink(z, m, opts.kink_margin));
    for (double& v : upstream) v = rng.normal();

    const auto grad = luca_backward(std::span<const double>(z), m, std::span<const double>(upstream));
    double worst = 0.0;
    worst = std::max(worst, check_matrix(m.w_down, grad.w_down, z, m, upstream, opts.step));
    worst = std::max(worst, check_matrix(m.w_up, grad.w_up, z, m, upstream, opts.step));
    worst = std::max(worst, check_matrix(m.v_down, grad.v_down, z, m, upstream, opts.step));
    worst = std::max(worst, check_matrix(m.v_up, grad.v_up, z, m, upstream, opts.step));
    for (std::size_t i = 0; i < d; ++i) {
      const double saved = z[i];
      z[i] = saved + opts.step;
      const double plus = objective(z, m, upstream);
      z[i] = saved - opts.step;
      const double minus = objective(z, m, upstream);
      z[i] = saved;
      worst = std::max(worst, relative_error(grad.d_input[i], (plus - minus) / (2.0 * opts.step)));
    }
    result.trials.push_back(GradCheckTrial{d, r, m.config, worst});
    result.max_rel_error = std::max(result.max_rel_error, worst);
  }
  return result;
}

}  // namespace tosca
