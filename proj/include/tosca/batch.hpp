#pragma once

// Data-parallel evaluation kernels. Each has a serial twin that is kept as the
// reference the parallel path is tested against.

#include <cstddef>
#include <span>
#include <vector>

#include "tosca/engine.hpp"

namespace tosca {

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

/// out[i] = fn(i) for i in [0, n), iterations split statically across threads.
/// fn must be safe to call concurrently.
template <typename Out, typename Fn>
std::vector<Out> parallel_map(std::size_t n, Fn&& fn) {
  std::vector<Out> out(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
  return out;
}

template <typename Out, typename Fn>
std::vector<Out> serial_map(std::size_t n, Fn&& fn) {
  std::vector<Out> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
  return out;
}

std::vector<Prediction> predict_batch(const ModuleBank& bank, std::span<const LabeledSample> samples,
                                      const PredictOptions& opts = {});
std::vector<Prediction> predict_batch_serial(const ModuleBank& bank,
                                             std::span<const LabeledSample> samples,
                                             const PredictOptions& opts = {});

/// Argmax class of a single module + head over every sample. When
/// `allowed_columns` is nonempty, only those head columns compete.
std::vector<ClassId> classify_batch(const LucaModule& module, const SessionHead& head,
                                    std::span<const LabeledSample> samples,
                                    std::span<const std::size_t> allowed_columns = {});
std::vector<ClassId> classify_batch_serial(const LucaModule& module, const SessionHead& head,
                                           std::span<const LabeledSample> samples,
                                           std::span<const std::size_t> allowed_columns = {});

}  // namespace tosca
