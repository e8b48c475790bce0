#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the library's numeric paths.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

/// erf by its Maclaurin series in long double; accurate to ~1e-18 for |x| <= 3.
inline long double erf_series(long double x) {
  long double term = x, sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    const long double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs(add) < 1e-22L) break;
  }
  return sum * 2.0L / std::sqrt(3.14159265358979323846264338327950288L);
}

inline long double gelu(long double x) { return x * 0.5L * (1.0L + erf_series(x / std::sqrt(2.0L))); }

/// y = x * M, M row-major rows x cols, plain triple loop in double.
inline std::vector<double> vec_mat(const std::vector<double>& x, const std::vector<double>& m,
                                   std::size_t rows, std::size_t cols) {
  std::vector<double> y(cols, 0.0);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) y[j] += x[i] * m[i * cols + j];
  return y;
}

/// Central difference of f at theta[i].
inline double central_difference(const std::function<double()>& f, double& theta, double h) {
  const double saved = theta;
  theta = saved + h;
  const double plus = f();
  theta = saved - h;
  const double minus = f();
  theta = saved;
  return (plus - minus) / (2.0 * h);
}

/// Scratch directory under the build tree, emptied on construction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::current_path() / ("tmp_" + name)) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  std::filesystem::path operator/(const std::string& f) const { return path / f; }
};

}  // namespace oracle
