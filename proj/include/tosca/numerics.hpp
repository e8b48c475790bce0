#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tosca {

/// Row vector in feature space. Parameters and features are stored as float;
/// gradient checks instantiate the same code with double.
template <typename T>
using Vector = std::vector<T>;

using RealVector = Vector<float>;

/// Probability distribution over a session's classes. Always double.
using ProbVector = std::vector<double>;

/// Dense row-major matrix.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{0})
      : rows(r), cols(c), values(r * c, fill) {}

  T& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return values[i * cols + j];
  }

  std::span<const T> row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }

  std::size_t size() const { return values.size(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

using RealMatrix = Matrix<float>;

enum class Activation { relu, gelu, sigmoid };

const char* to_string(Activation kind);
Activation parse_activation(const std::string& name);

/// sigma(x) for the three supported kinds. gelu is the exact erf form.
double activation(Activation kind, double x);

/// d sigma / dx. relu' is 0 at the kink.
double activation_grad(Activation kind, double x);

/// Numerically stable softmax. Throws on empty input.
ProbVector softmax(std::span<const double> logits);

/// Shannon entropy in nats with 0 ln 0 = 0. Rejects non-normalized input.
double shannon_entropy(std::span<const double> p);

/// x * M for a row vector x (len == M.rows). Accumulates in double.
template <typename T>
std::vector<double> row_times(std::span<const T> x, const Matrix<T>& m) {
  if (x.size() != m.rows) {
    throw std::invalid_argument("dimension mismatch: vector length " +
                                std::to_string(x.size()) + " vs matrix rows " +
                                std::to_string(m.rows));
  }
  std::vector<double> out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double xi = static_cast<double>(x[i]);
    if (xi == 0.0) continue;
    const T* row = m.values.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) {
      out[j] += xi * static_cast<double>(row[j]);
    }
  }
  return out;
}

/// M * y for a column vector y (len == M.cols). Accumulates in double.
template <typename T>
std::vector<double> times_col(const Matrix<T>& m, std::span<const double> y) {
  if (y.size() != m.cols) {
    throw std::invalid_argument("dimension mismatch: vector length " +
                                std::to_string(y.size()) + " vs matrix cols " +
                                std::to_string(m.cols));
  }
  std::vector<double> out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const T* row = m.values.data() + i * m.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) acc += static_cast<double>(row[j]) * y[j];
    out[i] = acc;
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

template <typename T>
bool all_finite(std::span<const T> v);

/// Index of the first maximum entry (ties go to the lowest index).
std::size_t argmax(std::span<const double> v);

}  // namespace tosca
