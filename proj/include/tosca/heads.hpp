#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "tosca/data.hpp"
#include "tosca/numerics.hpp"

namespace tosca {

/// Bias-free linear classifier over one session's classes. Column j of w
/// scores class_ids[j].
struct SessionHead {
  RealMatrix w;  // d x K
  std::vector<ClassId> class_ids;

  SessionHead() = default;
  /// Zero-initialized head (uniform softmax at start).
  SessionHead(std::size_t d, std::vector<ClassId> ids);

  std::size_t num_classes() const { return class_ids.size(); }
  std::size_t dim() const { return w.rows; }
  /// Column index of a class, or npos.
  std::size_t column_of(ClassId id) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  friend bool operator==(const SessionHead&, const SessionHead&) = default;
};

std::vector<double> head_forward(std::span<const double> phi_prime, const SessionHead& head);
std::vector<double> head_forward(std::span<const float> phi_prime, const SessionHead& head);

/// Column with the highest score; ties go to the lowest class id. When
/// `allowed` is nonempty only those columns compete.
std::size_t best_column(std::span<const double> scores, std::span<const ClassId> class_ids,
                        std::span<const std::size_t> allowed = {});

/// Class means of frozen features (nearest-class-mean classifier state).
struct PrototypeBank {
  std::size_t d = 0;
  std::map<ClassId, std::vector<double>> prototypes;
  std::map<ClassId, std::size_t> counts;
};

/// Mean feature vector per class present in samples.
PrototypeBank build_prototypes(std::span<const LabeledSample> samples);

/// Argmax cosine similarity to a prototype; ties go to the lowest class id.
ClassId prototype_classify(std::span<const float> x, const PrototypeBank& bank);

}  // namespace tosca
