#include "tosca/heads.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tosca {

SessionHead::SessionHead(std::size_t d, std::vector<ClassId> ids)
    : w(d, ids.size()), class_ids(std::move(ids)) {
  if (class_ids.empty()) throw std::invalid_argument("session head needs at least one class");
  if (std::set<ClassId>(class_ids.begin(), class_ids.end()).size() != class_ids.size()) {
    throw std::invalid_argument("session head class ids must be unique");
  }
}

std::size_t SessionHead::column_of(ClassId id) const {
  const auto it = std::find(class_ids.begin(), class_ids.end(), id);
  return it == class_ids.end() ? npos : static_cast<std::size_t>(it - class_ids.begin());
}

std::vector<double> head_forward(std::span<const double> phi_prime, const SessionHead& head) {
  if (phi_prime.size() != head.w.rows) {
    throw std::invalid_argument("dimension mismatch: feature length " +
                                std::to_string(phi_prime.size()) + ", head d " +
                                std::to_string(head.w.rows));
  }
  std::vector<double> logits(head.w.cols, 0.0);
  for (std::size_t i = 0; i < head.w.rows; ++i) {
    const double x = phi_prime[i];
    const float* row = head.w.values.data() + i * head.w.cols;
    for (std::size_t j = 0; j < head.w.cols; ++j) logits[j] += x * static_cast<double>(row[j]);
  }
  return logits;
}

std::vector<double> head_forward(std::span<const float> phi_prime, const SessionHead& head) {
  const std::vector<double> x(phi_prime.begin(), phi_prime.end());
  return head_forward(std::span<const double>(x), head);
}

std::size_t best_column(std::span<const double> scores, std::span<const ClassId> class_ids,
                        std::span<const std::size_t> allowed) {
  if (scores.size() != class_ids.size() || scores.empty()) {
    throw std::invalid_argument("best_column: score/class length mismatch");
  }
  const std::size_t count = allowed.empty() ? scores.size() : allowed.size();
  auto col = [&](std::size_t i) { return allowed.empty() ? i : allowed[i]; };
  std::size_t best = col(0);
  for (std::size_t i = 1; i < count; ++i) {
    const std::size_t c = col(i);
    if (scores[c] > scores[best] || (scores[c] == scores[best] && class_ids[c] < class_ids[best])) {
      best = c;
    }
  }
  return best;
}

PrototypeBank build_prototypes(std::span<const LabeledSample> samples) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  PrototypeBank bank;
  bank.d = samples.front().features.size();
  for (const auto& s : samples) {
    if (s.features.size() != bank.d) throw std::invalid_argument("dimension mismatch in prototypes");
    auto& sum = bank.prototypes[s.label];
    if (sum.empty()) sum.assign(bank.d, 0.0);
    for (std::size_t j = 0; j < bank.d; ++j) sum[j] += static_cast<double>(s.features[j]);
    ++bank.counts[s.label];
  }
  for (auto& [id, sum] : bank.prototypes) {
    const double n = static_cast<double>(bank.counts[id]);
    for (double& v : sum) v /= n;
  }
  return bank;
}

ClassId prototype_classify(std::span<const float> x, const PrototypeBank& bank) {
  if (bank.prototypes.empty()) throw std::invalid_argument("empty prototype bank");
  if (x.size() != bank.d) throw std::invalid_argument("dimension mismatch in prototype_classify");
  const std::vector<double> xd(x.begin(), x.end());
  const double xn = l2_norm(xd);
  if (xn == 0.0) throw std::invalid_argument("degenerate vector");
  bool first = true;
  ClassId best = 0;
  double best_cos = 0.0;
  for (const auto& [id, proto] : bank.prototypes) {
    const double pn = l2_norm(proto);
    if (pn == 0.0) throw std::invalid_argument("degenerate vector");
    const double c = dot(xd, proto) / (xn * pn);
    if (first || c > best_cos) {
      best = id;
      best_cos = c;
      first = false;
    }
  }
  return best;
}

}  // namespace tosca
