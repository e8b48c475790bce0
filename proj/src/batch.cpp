#include "tosca/batch.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tosca {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::vector<Prediction> predict_batch(const ModuleBank& bank, std::span<const LabeledSample> samples,
                                      const PredictOptions& opts) {
  return parallel_map<Prediction>(samples.size(), [&](std::size_t i) {
    return predict(std::span<const float>(samples[i].features), bank, opts);
  });
}

std::vector<Prediction> predict_batch_serial(const ModuleBank& bank,
                                             std::span<const LabeledSample> samples,
                                             const PredictOptions& opts) {
  return serial_map<Prediction>(samples.size(), [&](std::size_t i) {
    return predict(std::span<const float>(samples[i].features), bank, opts);
  });
}

namespace {

ClassId classify_one(const LucaModule& module, const SessionHead& head, std::span<const float> x,
                     std::span<const std::size_t> allowed) {
  const auto phi = luca_forward(x, module);
  const auto logits = head_forward(std::span<const double>(phi), head);
  return head.class_ids[best_column(logits, head.class_ids, allowed)];
}

}  // namespace

std::vector<ClassId> classify_batch(const LucaModule& module, const SessionHead& head,
                                    std::span<const LabeledSample> samples,
                                    std::span<const std::size_t> allowed_columns) {
  return parallel_map<ClassId>(samples.size(), [&](std::size_t i) {
    return classify_one(module, head, samples[i].features, allowed_columns);
  });
}

std::vector<ClassId> classify_batch_serial(const LucaModule& module, const SessionHead& head,
                                           std::span<const LabeledSample> samples,
                                           std::span<const std::size_t> allowed_columns) {
  return serial_map<ClassId>(samples.size(), [&](std::size_t i) {
    return classify_one(module, head, samples[i].features, allowed_columns);
  });
}

}  // namespace tosca
