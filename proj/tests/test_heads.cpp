#include <doctest.h>

#include <cmath>

#include "tosca/data.hpp"
#include "tosca/heads.hpp"
#include "tosca/rng.hpp"

using namespace tosca;

TEST_CASE("zero head gives zero logits") {
  const SessionHead h(3, {4, 7});
  const std::vector<double> phi{1.0, -2.0, 0.5};
  const auto logits = head_forward(std::span<const double>(phi), h);
  CHECK(logits == std::vector<double>{0.0, 0.0});
  CHECK(h.num_classes() == 2);
  CHECK(h.column_of(7) == 1);
  CHECK(h.column_of(5) == SessionHead::npos);
}

TEST_CASE("identity projection") {
  SessionHead h(2, {0, 1});
  h.w(0, 0) = 1;
  h.w(1, 1) = 1;
  const std::vector<double> phi{3, -1};
  CHECK(head_forward(std::span<const double>(phi), h) == std::vector<double>{3, -1});
  const std::vector<double> bad{1, 2, 3};
  CHECK_THROWS_AS(head_forward(std::span<const double>(bad), h), std::invalid_argument);
}

TEST_CASE("head construction is validated") {
  CHECK_THROWS(SessionHead(2, {}));
  CHECK_THROWS(SessionHead(2, {1, 1}));
}

TEST_CASE("head forward is linear") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    SessionHead h(8, {0, 1, 2});
    for (float& v : h.w.values) v = static_cast<float>(rng.normal());
    std::vector<float> x(8), y(8), mix(8);
    const float a = static_cast<float>(rng.normal()), b = static_cast<float>(rng.normal());
    for (std::size_t i = 0; i < 8; ++i) {
      x[i] = static_cast<float>(rng.normal());
      y[i] = static_cast<float>(rng.normal());
      mix[i] = a * x[i] + b * y[i];
    }
    const auto fx = head_forward(std::span<const float>(x), h);
    const auto fy = head_forward(std::span<const float>(y), h);
    const auto fm = head_forward(std::span<const float>(mix), h);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(fm[j] - (a * fx[j] + b * fy[j])) <= 1e-5);
  }
}

TEST_CASE("best column ties go to the lowest class id") {
  const std::vector<double> s{2.0, 5.0, 5.0};
  const std::vector<ClassId> ids{9, 8, 3};
  CHECK(best_column(s, ids) == 2);
  const std::vector<std::size_t> allowed{0, 1};
  CHECK(best_column(s, ids, allowed) == 1);
}

TEST_CASE("prototype means") {
  std::vector<LabeledSample> s{{3, {1, 3}}, {3, {3, 5}}, {5, {7, 1}}};
  const auto bank = build_prototypes(s);
  CHECK(bank.prototypes.at(3) == std::vector<double>{2, 4});
  CHECK(bank.prototypes.at(5) == std::vector<double>{7, 1});
  CHECK(bank.counts.at(3) == 2);

  auto doubled = s;
  doubled.insert(doubled.end(), s.begin(), s.end());
  CHECK(build_prototypes(doubled).prototypes == bank.prototypes);

  CHECK_THROWS_WITH(build_prototypes(std::vector<LabeledSample>{}), "no samples");
}

TEST_CASE("cosine classification examples") {
  std::vector<LabeledSample> s{{1, {1, 0}}, {2, {0, 1}}};
  const auto bank = build_prototypes(s);
  const std::vector<float> x{0.9f, 0.1f}, exact{0, 1}, tie{1, 1}, zero{0, 0};
  CHECK(prototype_classify(x, bank) == 1);
  CHECK(prototype_classify(exact, bank) == 2);
  CHECK(prototype_classify(tie, bank) == 1);
  CHECK_THROWS_WITH(prototype_classify(zero, bank), "degenerate vector");

  std::vector<LabeledSample> z{{1, {0, 0}}};
  CHECK_THROWS_WITH(prototype_classify(x, build_prototypes(z)), "degenerate vector");
}

TEST_CASE("cosine classification ignores positive rescaling") {
  Rng rng(4);
  std::vector<LabeledSample> protos;
  for (ClassId c = 0; c < 6; ++c) {
    RealVector v(5);
    for (float& x : v) x = static_cast<float>(rng.normal());
    protos.push_back({c, v});
  }
  const auto bank = build_prototypes(protos);
  for (int t = 0; t < 200; ++t) {
    std::vector<float> x(5), scaled(5);
    const double c = std::exp(rng.normal(0.0, 2.0));
    for (std::size_t i = 0; i < 5; ++i) {
      x[i] = static_cast<float>(rng.normal());
      scaled[i] = static_cast<float>(x[i] * c);
    }
    CHECK(prototype_classify(x, bank) == prototype_classify(scaled, bank));
  }
}

TEST_CASE("prototypes separate well-separated clusters") {
  SynthParams p;
  p.d = 16;
  p.num_classes = 10;
  p.n_train = 50;
  p.n_test = 1;
  p.seed = 3;
  const auto [train, test] = synth_gaussian(p);
  const auto bank = build_prototypes(train.samples);
  std::size_t correct = 0;
  for (const auto& s : train.samples) correct += prototype_classify(s.features, bank) == s.label;
  CHECK(100.0 * correct / train.size() >= 99.0);
}
