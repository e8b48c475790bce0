#include "tosca/luca.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tosca/rng.hpp"

namespace tosca {

namespace {

template <typename T>
void check_dim(std::size_t got, const BasicLucaModule<T>& m) {
  if (got != m.d) {
    throw std::invalid_argument("dimension mismatch: input length " + std::to_string(got) +
                                ", module d " + std::to_string(m.d));
  }
}

// x * M with a double row vector against a matrix of any storage type.
template <typename T>
std::vector<double> mul_row(std::span<const double> x, const Matrix<T>& m) {
  std::vector<double> out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const T* row = m.values.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += xi * static_cast<double>(row[j]);
  }
  return out;
}

template <typename T>
std::vector<double> to_double(std::span<const T> z) {
  return {z.begin(), z.end()};
}

struct AdapterTrace {
  std::vector<double> pre;  // x * w_down
  std::vector<double> act;  // sigma(pre)
  std::vector<double> out;
};

struct GateTrace {
  std::vector<double> pre;   // x * v_down
  std::vector<double> act;   // sigma(pre)
  std::vector<double> gate;  // effective multiplier, including the residual 1
  std::vector<double> out;
};

template <typename T>
AdapterTrace adapter_pass(std::span<const double> x, const BasicLucaModule<T>& m) {
  AdapterTrace tr;
  tr.pre = mul_row(x, m.w_down);
  tr.act.resize(m.r);
  for (std::size_t k = 0; k < m.r; ++k) tr.act[k] = activation(m.config.adapter_act, tr.pre[k]);
  tr.out = mul_row(std::span<const double>(tr.act), m.w_up);
  for (std::size_t j = 0; j < m.d; ++j) tr.out[j] += x[j];
  return tr;
}

template <typename T>
GateTrace gate_pass(std::span<const double> x, const BasicLucaModule<T>& m) {
  GateTrace tr;
  tr.pre = mul_row(x, m.v_down);
  tr.act.resize(m.r);
  for (std::size_t k = 0; k < m.r; ++k) tr.act[k] = activation(m.config.gate_act, tr.pre[k]);
  tr.gate = mul_row(std::span<const double>(tr.act), m.v_up);
  if (m.config.gate_residual) {
    for (double& g : tr.gate) g += 1.0;
  }
  tr.out.resize(m.d);
  for (std::size_t j = 0; j < m.d; ++j) tr.out[j] = x[j] * tr.gate[j];
  return tr;
}

// Backward through the adapter. Returns d/dx; adds into grad.w_down / w_up.
template <typename T>
std::vector<double> adapter_back(std::span<const double> x, const AdapterTrace& tr,
                                 const BasicLucaModule<T>& m, std::span<const double> up,
                                 BasicLucaGradients<T>& grad) {
  const std::size_t d = m.d, r = m.r;
  // d w_up[k][j] = act[k] * up[j]
  for (std::size_t k = 0; k < r; ++k) {
    const double a = tr.act[k];
    if (a == 0.0) continue;
    double* g = grad.w_up.values.data() + k * d;
    for (std::size_t j = 0; j < d; ++j) g[j] += a * up[j];
  }
  std::vector<double> d_pre(r, 0.0);
  for (std::size_t k = 0; k < r; ++k) {
    const T* row = m.w_up.values.data() + k * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += static_cast<double>(row[j]) * up[j];
    d_pre[k] = acc * activation_grad(m.config.adapter_act, tr.pre[k]);
  }
  std::vector<double> dx(up.begin(), up.end());
  for (std::size_t i = 0; i < d; ++i) {
    double* g = grad.w_down.values.data() + i * r;
    const T* row = m.w_down.values.data() + i * r;
    double acc = 0.0;
    for (std::size_t k = 0; k < r; ++k) {
      g[k] += x[i] * d_pre[k];
      acc += static_cast<double>(row[k]) * d_pre[k];
    }
    dx[i] += acc;
  }
  return dx;
}

// Backward through the calibrator. Returns d/dx; adds into grad.v_down / v_up.
template <typename T>
std::vector<double> gate_back(std::span<const double> x, const GateTrace& tr,
                              const BasicLucaModule<T>& m, std::span<const double> up,
                              BasicLucaGradients<T>& grad) {
  const std::size_t d = m.d, r = m.r;
  std::vector<double> d_gate(d);
  std::vector<double> dx(d);
  for (std::size_t j = 0; j < d; ++j) {
    d_gate[j] = up[j] * x[j];
    dx[j] = up[j] * tr.gate[j];
  }
  for (std::size_t k = 0; k < r; ++k) {
    const double a = tr.act[k];
    if (a == 0.0) continue;
    double* g = grad.v_up.values.data() + k * d;
    for (std::size_t j = 0; j < d; ++j) g[j] += a * d_gate[j];
  }
  std::vector<double> d_pre(r, 0.0);
  for (std::size_t k = 0; k < r; ++k) {
    const T* row = m.v_up.values.data() + k * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += static_cast<double>(row[j]) * d_gate[j];
    d_pre[k] = acc * activation_grad(m.config.gate_act, tr.pre[k]);
  }
  for (std::size_t i = 0; i < d; ++i) {
    double* g = grad.v_down.values.data() + i * r;
    const T* row = m.v_down.values.data() + i * r;
    double acc = 0.0;
    for (std::size_t k = 0; k < r; ++k) {
      g[k] += x[i] * d_pre[k];
      acc += static_cast<double>(row[k]) * d_pre[k];
    }
    dx[i] += acc;
  }
  return dx;
}

template <typename T>
std::vector<double> backward_impl(std::span<const T> z, const BasicLucaModule<T>& m,
                                  std::span<const double> upstream, BasicLucaGradients<T>& grad) {
  check_dim(z.size(), m);
  check_dim(upstream.size(), m);
  const auto x = to_double(z);
  if (!m.config.reversed) {
    const auto a = adapter_pass(std::span<const double>(x), m);
    const auto c = gate_pass(std::span<const double>(a.out), m);
    const auto du = gate_back(std::span<const double>(a.out), c, m, upstream, grad);
    return adapter_back(std::span<const double>(x), a, m, du, grad);
  }
  const auto c = gate_pass(std::span<const double>(x), m);
  const auto a = adapter_pass(std::span<const double>(c.out), m);
  const auto du = adapter_back(std::span<const double>(c.out), a, m, upstream, grad);
  return gate_back(std::span<const double>(x), c, m, du, grad);
}

}  // namespace

template <typename T>
std::vector<double> adapter_forward(std::span<const T> z, const BasicLucaModule<T>& m) {
  check_dim(z.size(), m);
  const auto x = to_double(z);
  return adapter_pass(std::span<const double>(x), m).out;
}

template <typename T>
std::vector<double> calibrator_forward(std::span<const T> z, const BasicLucaModule<T>& m) {
  check_dim(z.size(), m);
  const auto x = to_double(z);
  return gate_pass(std::span<const double>(x), m).out;
}

template <typename T>
std::vector<double> luca_forward(std::span<const T> z, const BasicLucaModule<T>& m) {
  check_dim(z.size(), m);
  const auto x = to_double(z);
  if (!m.config.reversed) {
    const auto a = adapter_pass(std::span<const double>(x), m);
    return gate_pass(std::span<const double>(a.out), m).out;
  }
  const auto c = gate_pass(std::span<const double>(x), m);
  return adapter_pass(std::span<const double>(c.out), m).out;
}

template <typename T>
BasicLucaGradients<T> luca_backward(std::span<const T> z, const BasicLucaModule<T>& m,
                                    std::span<const double> upstream) {
  BasicLucaGradients<T> grad(m);
  grad.d_input = backward_impl(z, m, upstream, grad);
  return grad;
}

template <typename T>
void luca_backward_accumulate(std::span<const T> z, const BasicLucaModule<T>& m,
                              std::span<const double> upstream, BasicLucaGradients<T>& into) {
  backward_impl(z, m, upstream, into);
}

template std::vector<double> adapter_forward(std::span<const float>, const BasicLucaModule<float>&);
template std::vector<double> adapter_forward(std::span<const double>, const BasicLucaModule<double>&);
template std::vector<double> calibrator_forward(std::span<const float>, const BasicLucaModule<float>&);
template std::vector<double> calibrator_forward(std::span<const double>,
                                                const BasicLucaModule<double>&);
template std::vector<double> luca_forward(std::span<const float>, const BasicLucaModule<float>&);
template std::vector<double> luca_forward(std::span<const double>, const BasicLucaModule<double>&);
template BasicLucaGradients<float> luca_backward(std::span<const float>, const BasicLucaModule<float>&,
                                                 std::span<const double>);
template BasicLucaGradients<double> luca_backward(std::span<const double>,
                                                  const BasicLucaModule<double>&,
                                                  std::span<const double>);
template void luca_backward_accumulate(std::span<const float>, const BasicLucaModule<float>&,
                                       std::span<const double>, BasicLucaGradients<float>&);
template void luca_backward_accumulate(std::span<const double>, const BasicLucaModule<double>&,
                                       std::span<const double>, BasicLucaGradients<double>&);

LucaModule init_luca(std::size_t d, std::size_t r, const LucaConfig& config, std::uint64_t seed) {
  if (d == 0 || r == 0) throw std::invalid_argument("init_luca: d and r must be positive");
  LucaModule m(d, r, config);
  Rng rng(seed);
  for (float& v : m.w_down.values) v = static_cast<float>(rng.normal(0.0, kInitStd));
  for (float& v : m.v_down.values) v = static_cast<float>(rng.normal(0.0, kInitStd));
  for (float& v : m.v_up.values) v = static_cast<float>(rng.normal(0.0, kInitStd));
  return m;
}

std::size_t param_count(std::size_t d, std::size_t r) { return 4 * d * r; }

std::size_t layerwise_adapter_count(std::size_t n_layers, std::size_t d, std::size_t r) {
  return n_layers * 2 * d * r;
}

template <typename T>
double l1_norm(const BasicLucaModule<T>& m) {
  double total = 0.0;
  for (const auto* mat : {&m.w_down, &m.w_up, &m.v_down, &m.v_up}) {
    for (T v : mat->values) total += std::abs(static_cast<double>(v));
  }
  return total;
}

template <typename T>
double sparsity_ratio(const BasicLucaModule<T>& m, double threshold) {
  std::size_t small = 0, total = 0;
  for (const auto* mat : {&m.w_down, &m.w_up, &m.v_down, &m.v_up}) {
    for (T v : mat->values) {
      const double a = std::abs(static_cast<double>(v));
      if (threshold > 0.0 ? a < threshold : a == 0.0) ++small;
    }
    total += mat->size();
  }
  return total == 0 ? 0.0 : static_cast<double>(small) / static_cast<double>(total);
}

template double l1_norm(const BasicLucaModule<float>&);
template double l1_norm(const BasicLucaModule<double>&);
template double sparsity_ratio(const BasicLucaModule<float>&, double);
template double sparsity_ratio(const BasicLucaModule<double>&, double);

std::vector<double> flatten(const LucaModule& m) {
  std::vector<double> out;
  out.reserve(m.stored_param_count());
  for (const auto* mat : {&m.w_down, &m.w_up, &m.v_down, &m.v_up}) {
    out.insert(out.end(), mat->values.begin(), mat->values.end());
  }
  return out;
}

}  // namespace tosca
