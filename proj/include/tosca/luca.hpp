#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "tosca/numerics.hpp"

namespace tosca {

/// Architectural choices for one adapter + calibrator pair. The activation is
/// not pinned down by the method, so both are configurable.
struct LucaConfig {
  Activation adapter_act = Activation::sigmoid;
  Activation gate_act = Activation::gelu;
  /// Gate becomes (1 + g) instead of g, so a zero gate is the identity.
  bool gate_residual = true;
  /// Calibrate first, then adapt: A(C(z)) instead of C(A(z)).
  bool reversed = false;

  friend bool operator==(const LucaConfig&, const LucaConfig&) = default;
};

/// Adapter (w_down, w_up) followed by calibrator (v_down, v_up) acting on one
/// d-dimensional token. No bias terms.
template <typename T>
struct BasicLucaModule {
  std::size_t d = 0;
  std::size_t r = 0;
  Matrix<T> w_down;  // d x r
  Matrix<T> w_up;    // r x d
  Matrix<T> v_down;  // d x r
  Matrix<T> v_up;    // r x d
  LucaConfig config;

  BasicLucaModule() = default;
  BasicLucaModule(std::size_t d_, std::size_t r_, LucaConfig cfg = {})
      : d(d_), r(r_), w_down(d_, r_), w_up(r_, d_), v_down(d_, r_), v_up(r_, d_), config(cfg) {}

  /// Number of stored trainable scalars, counted from the matrices themselves.
  std::size_t stored_param_count() const {
    return w_down.size() + w_up.size() + v_down.size() + v_up.size();
  }

  friend bool operator==(const BasicLucaModule&, const BasicLucaModule&) = default;
};

using LucaModule = BasicLucaModule<float>;

template <typename T>
struct BasicLucaGradients {
  Matrix<double> w_down, w_up, v_down, v_up;
  std::vector<double> d_input;

  explicit BasicLucaGradients(const BasicLucaModule<T>& m)
      : w_down(m.d, m.r), w_up(m.r, m.d), v_down(m.d, m.r), v_up(m.r, m.d), d_input(m.d, 0.0) {}
};

using LucaGradients = BasicLucaGradients<float>;

template <typename T>
std::vector<double> adapter_forward(std::span<const T> z, const BasicLucaModule<T>& m);

template <typename T>
std::vector<double> calibrator_forward(std::span<const T> z, const BasicLucaModule<T>& m);

/// C(A(z)), or A(C(z)) when config.reversed.
template <typename T>
std::vector<double> luca_forward(std::span<const T> z, const BasicLucaModule<T>& m);

/// Gradients of dot(upstream, luca_forward(z)) w.r.t. all four matrices and z.
template <typename T>
BasicLucaGradients<T> luca_backward(std::span<const T> z, const BasicLucaModule<T>& m,
                                    std::span<const double> upstream);

/// Accumulates luca_backward into an existing gradient buffer (no d_input).
template <typename T>
void luca_backward_accumulate(std::span<const T> z, const BasicLucaModule<T>& m,
                              std::span<const double> upstream, BasicLucaGradients<T>& into);

/// w_down, v_down, v_up ~ N(0, 0.02^2); w_up = 0, so the adapter starts as
/// the identity.
LucaModule init_luca(std::size_t d, std::size_t r, const LucaConfig& config, std::uint64_t seed);

constexpr double kInitStd = 0.02;

std::size_t param_count(std::size_t d, std::size_t r);

/// Adapters in every one of n_layers transformer layers: n_layers * 2dr.
std::size_t layerwise_adapter_count(std::size_t n_layers, std::size_t d, std::size_t r);

/// Sum of |theta| over the four matrices.
template <typename T>
double l1_norm(const BasicLucaModule<T>& m);

/// Fraction of entries with |theta| < threshold. With threshold 0 this counts
/// exact zeros.
template <typename T>
double sparsity_ratio(const BasicLucaModule<T>& m, double threshold);

/// Concatenation of w_down, w_up, v_down, v_up.
std::vector<double> flatten(const LucaModule& m);

}  // namespace tosca
