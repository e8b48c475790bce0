#include <doctest.h>

#include <cmath>
#include <fstream>

#include "oracles.hpp"
#include "tosca/batch.hpp"
#include "tosca/engine.hpp"
#include "tosca/rng.hpp"

using namespace tosca;

namespace {

// Module whose forward pass is exactly the identity.
LucaModule identity_module(std::size_t d, std::size_t r) {
  LucaModule m = init_luca(d, r, {}, 1);
  std::fill(m.v_up.values.begin(), m.v_up.values.end(), 0.0f);
  return m;
}

BankEntry entry(std::uint32_t index, std::size_t d, std::vector<ClassId> ids, const RealMatrix& w) {
  BankEntry e{index, identity_module(d, 2), SessionHead(d, std::move(ids))};
  e.head.w = w;
  return e;
}

EngineConfig small_config() {
  EngineConfig cfg;
  cfg.r = 4;
  cfg.optim.epochs = 5;
  cfg.optim.batch_size = 16;
  return cfg;
}

std::pair<FeatureDataset, FeatureDataset> toy_data(std::size_t classes, std::uint64_t seed = 2) {
  SynthParams p;
  p.d = 8;
  p.num_classes = classes;
  p.n_train = 30;
  p.n_test = 10;
  p.seed = seed;
  return synth_gaussian(p);
}

std::vector<LabeledSample> of_classes(const FeatureDataset& ds, std::set<ClassId> keep) {
  return ds.subset(keep).samples;
}

}  // namespace

TEST_CASE("bank grows by one per session and freezes the past") {
  const auto [train, test] = toy_data(6);
  const auto cfg = small_config();
  ModuleBank bank(train.d, cfg.r, cfg.luca);
  std::vector<std::uint64_t> sums;
  for (ClassId b = 0; b < 3; ++b) {
    const std::vector<ClassId> ids{2 * b, 2 * b + 1};
    const auto before = encode_bank(bank);
    bank = train_session(bank, of_classes(train, {ids.begin(), ids.end()}), ids, cfg, 10 + b);
    CHECK(bank.size() == b + 1);
    CHECK(bank[b].session_index == b + 1);
    for (std::size_t i = 0; i < sums.size(); ++i) CHECK(entry_checksum(bank[i]) == sums[i]);
    sums.push_back(entry_checksum(bank[b]));
    // Serialized prefix of earlier entries is unchanged.
    const auto after = encode_bank(bank);
    CHECK(std::equal(before.begin() + 24, before.end(), after.begin() + 24));
  }
  CHECK(bank.session_of(3) == 2);
  CHECK(bank.session_of(99) == 0);
}

TEST_CASE("train_session rejects overlapping classes and empty data") {
  const auto [train, test] = toy_data(4);
  const auto cfg = small_config();
  ModuleBank bank(train.d, cfg.r);
  bank = train_session(bank, of_classes(train, {0, 1}), {0, 1}, cfg, 1);
  CHECK_THROWS_WITH_AS(train_session(bank, of_classes(train, {1, 2}), {1, 2}, cfg, 2),
                       doctest::Contains("overlapping classes"), std::invalid_argument);
  CHECK_THROWS(train_session(bank, std::vector<LabeledSample>{}, {2, 3}, cfg, 2));
}

TEST_CASE("trainable parameters per session") {
  CHECK(session_trainable_count(32, 48, 5) == 4 * 32 * 48 + 32 * 5);
  const auto [train, test] = toy_data(4);
  const auto cfg = small_config();
  auto bank = train_session(ModuleBank(train.d, cfg.r), of_classes(train, {0, 1, 2}), {0, 1, 2}, cfg, 1);
  const auto& e = bank[0];
  const std::size_t stored = e.module.stored_param_count() + e.head.w.size();
  CHECK(stored == session_trainable_count(train.d, cfg.r, 3));
}

TEST_CASE("predict picks the confident session") {
  const std::size_t d = 2;
  RealMatrix sharp(d, 2), flat(d, 2);
  sharp(0, 0) = 1000.0f;
  ModuleBank bank(d, 2);
  bank.append(entry(1, d, {10, 11}, flat));
  bank.append(entry(2, d, {20, 21}, sharp));
  const std::vector<float> x{1.0f, 0.0f};
  const auto p = predict(x, bank);
  CHECK(p.chosen_session == 2);
  CHECK(p.class_id == 20);
  CHECK(p.per_session_entropy[0] == doctest::Approx(std::log(2.0)));
  CHECK(p.per_session_entropy[1] == 0.0);
  CHECK(p.per_session_distribution[0] == std::vector<double>{0.5, 0.5});
}

TEST_CASE("predict tie rules") {
  const std::size_t d = 2;
  RealMatrix w(d, 2);
  w(0, 0) = 2.0f;
  ModuleBank bank(d, 2);
  bank.append(entry(1, d, {5, 4}, w));
  bank.append(entry(2, d, {7, 6}, w));
  const std::vector<float> x{1.0f, 0.0f};
  CHECK(predict(x, bank).chosen_session == 1);

  // Uniform head: both columns tie, lowest class id wins.
  ModuleBank flat(d, 2);
  flat.append(entry(1, d, {5, 4}, RealMatrix(d, 2)));
  CHECK(predict(x, flat).class_id == 4);
  CHECK_THROWS_WITH(predict(x, ModuleBank(d, 2)), "predict: empty bank");
}

TEST_CASE("single-session bank reduces to the head argmax") {
  Rng rng(3);
  const std::size_t d = 4;
  RealMatrix w(d, 3);
  for (float& v : w.values) v = static_cast<float>(rng.normal());
  ModuleBank bank(d, 2);
  bank.append(entry(1, d, {0, 1, 2}, w));
  for (int t = 0; t < 50; ++t) {
    std::vector<float> x(d);
    for (float& v : x) v = static_cast<float>(rng.normal());
    const auto logits = head_forward(std::span<const float>(x), bank[0].head);
    CHECK(predict(x, bank).class_id == argmax(logits));
  }
}

TEST_CASE("entropy normalization and priors") {
  const std::size_t d = 2;
  // Session 1: K=2, mild preference. Session 2: K=4, uniform.
  RealMatrix w2(d, 2);
  w2(0, 0) = 0.1f;
  ModuleBank bank(d, 2);
  bank.append(entry(1, d, {0, 1}, w2));
  bank.append(entry(2, d, {2, 3, 4, 5}, RealMatrix(d, 4)));
  const std::vector<float> x{1.0f, 0.0f};
  CHECK(predict(x, bank).chosen_session == 1);

  PredictOptions priors;
  priors.priors = {0.01, 0.99};
  CHECK(predict(x, bank, priors).chosen_session == 2);
  priors.priors = {1.0};
  CHECK_THROWS(predict(x, bank, priors));
}

TEST_CASE("predict_with pulls the feature once") {
  const auto [train, test] = toy_data(4);
  const auto cfg = small_config();
  auto bank = train_session(ModuleBank(train.d, cfg.r), of_classes(train, {0, 1}), {0, 1}, cfg, 1);
  bank = train_session(bank, of_classes(train, {2, 3}), {2, 3}, cfg, 2);
  int calls = 0;
  const auto p = predict_with(
      [&] {
        ++calls;
        return test.samples[0].features;
      },
      bank);
  CHECK(calls == 1);
  CHECK(p.class_id == predict(test.samples[0].features, bank).class_id);
}

TEST_CASE("evaluate_stage arithmetic") {
  const std::size_t d = 2;
  RealMatrix w(d, 2);
  w(0, 0) = 5.0f;
  w(1, 1) = 5.0f;
  ModuleBank bank(d, 2);
  bank.append(entry(1, d, {0, 1}, w));
  const std::vector<LabeledSample> right{{0, {1, 0}}, {1, {0, 1}}};
  const std::vector<LabeledSample> wrong{{1, {1, 0}}, {0, {0, 1}}};
  const std::vector<LabeledSample> half{{0, {1, 0}}, {0, {0, 1}}};
  CHECK(evaluate_stage(bank, right).accuracy == 100.0);
  CHECK(evaluate_stage(bank, wrong).accuracy == 0.0);
  CHECK(evaluate_stage(bank, half).accuracy == 50.0);
  CHECK(*evaluate_stage(bank, half).selection_accuracy == 100.0);
  CHECK_THROWS(evaluate_stage(bank, std::vector<LabeledSample>{}));
  CHECK_THROWS(evaluate_stage(bank, std::vector<LabeledSample>{{7, {1, 0}}}));
}

TEST_CASE("appending a duplicate module never changes the prediction") {
  const auto [train, test] = toy_data(4);
  const auto cfg = small_config();
  auto bank = train_session(ModuleBank(train.d, cfg.r), of_classes(train, {0, 1}), {0, 1}, cfg, 1);
  bank = train_session(bank, of_classes(train, {2, 3}), {2, 3}, cfg, 2);

  // Same parameters, fresh class ids: ties with entry 2 and loses on index.
  for (std::size_t src = 0; src < 2; ++src) {
    ModuleBank extended = bank;
    BankEntry dup = bank[src];
    dup.session_index = 3;
    dup.head.class_ids = {100, 101};
    extended.append(dup);
    for (const auto& s : test.samples) CHECK(predict(s.features, extended).class_id == predict(s.features, bank).class_id);
  }
}

TEST_CASE("correct routing composes per-session head accuracy") {
  const auto [train, test] = toy_data(6, 8);
  const auto cfg = small_config();
  ModuleBank bank(train.d, cfg.r);
  for (ClassId b = 0; b < 3; ++b) {
    const std::vector<ClassId> ids{2 * b, 2 * b + 1};
    bank = train_session(bank, of_classes(train, {ids.begin(), ids.end()}), ids, cfg, 20 + b);
  }
  std::size_t oracle_correct = 0, routed = 0;
  for (const auto& s : test.samples) {
    const auto& own = bank[bank.session_of(s.label) - 1];
    // Brute force: this session's module and head alone.
    const auto phi = luca_forward(std::span<const float>(s.features), own.module);
    const auto logits = head_forward(std::span<const double>(phi), own.head);
    const ClassId alone = own.head.class_ids[argmax(logits)];
    oracle_correct += alone == s.label;
    const auto p = predict(s.features, bank);
    if (p.chosen_session == own.session_index) {
      ++routed;
      CHECK(p.class_id == alone);
    }
  }
  const auto stage = evaluate_stage(bank, test.samples);
  if (routed == test.size()) {
    CHECK(stage.accuracy == doctest::Approx(100.0 * oracle_correct / test.size()));
  }
  CHECK(*stage.selection_accuracy == doctest::Approx(100.0 * routed / test.size()));
}

TEST_CASE("sessions train without earlier data") {
  oracle::TempDir tmp("exemplar_free");
  const auto cfg = small_config();
  ModuleBank in_memory(8, cfg.r);
  {
    const auto [train, test] = toy_data(4);
    in_memory = train_session(in_memory, of_classes(train, {0, 1}), {0, 1}, cfg, 1);
    save_bank(in_memory, tmp / "bank.bin");
  }
  const auto [train, test] = toy_data(4);
  const auto session2 = of_classes(train, {2, 3});
  const auto reloaded = load_bank(tmp / "bank.bin", cfg.luca);
  const auto a = train_session(in_memory, session2, {2, 3}, cfg, 2);
  const auto b = train_session(reloaded, session2, {2, 3}, cfg, 2);
  CHECK(encode_bank(a) == encode_bank(b));
}

TEST_CASE("module orthogonality") {
  ModuleBank same(2, 1);
  LucaModule m(2, 1);
  m.w_down.values = {1, 2};
  same.append({1, m, SessionHead(2, {0})});
  same.append({2, m, SessionHead(2, {1})});
  CHECK(module_orthogonality(same) == doctest::Approx(1.0));

  ModuleBank disjoint(2, 1);
  LucaModule a(2, 1), b(2, 1);
  a.w_down.values = {1, 0};
  b.v_up.values = {0, 3};
  disjoint.append({1, a, SessionHead(2, {0})});
  disjoint.append({2, b, SessionHead(2, {1})});
  CHECK(module_orthogonality(disjoint) == 0.0);

  ModuleBank one(2, 1);
  one.append({1, a, SessionHead(2, {0})});
  CHECK_THROWS(module_orthogonality(one));
}

TEST_CASE("bank append validation") {
  ModuleBank bank(2, 1);
  CHECK_THROWS(bank.append({2, LucaModule(2, 1), SessionHead(2, {0})}));
  CHECK_THROWS(bank.append({1, LucaModule(3, 1), SessionHead(2, {0})}));
  bank.append({1, LucaModule(2, 1), SessionHead(2, {0})});
  CHECK_THROWS(bank.append({2, LucaModule(2, 1), SessionHead(2, {0, 1})}));
}

TEST_CASE("method names") {
  for (Method m : {Method::tosca, Method::tosca_r, Method::finetune, Method::joint, Method::simplecil})
    CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS(parse_method("ewc"));
}

TEST_CASE("average accuracy") {
  const std::vector<StageResult> s{{1, 100.0, {}, 0}, {2, 50.0, {}, 0}};
  CHECK(average_accuracy(s) == 75.0);
}

TEST_CASE("scenarios are deterministic") {
  const auto [train, test] = toy_data(6);
  const auto splits = make_splits(train.classes(), 0, 2, 3);
  const auto cfg = small_config();
  for (Method m : {Method::tosca, Method::tosca_r, Method::finetune, Method::joint, Method::simplecil}) {
    auto a = run_scenario(train, test, splits, m, cfg, 4);
    auto b = run_scenario(train, test, splits, m, cfg, 4);
    CHECK(a.report.stages.size() == 3);
    CHECK(a.report.average_accuracy == b.report.average_accuracy);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.report.stages[i].accuracy == b.report.stages[i].accuracy);
    CHECK(a.bank.has_value() == (m == Method::tosca || m == Method::tosca_r));
    if (a.bank) CHECK(encode_bank(*a.bank) == encode_bank(*b.bank));
    CHECK(a.report.average_accuracy == doctest::Approx(average_accuracy(a.report.stages)));
    for (const auto& s : a.report.stages) {
      CHECK(s.accuracy >= 0.0);
      CHECK(s.accuracy <= 100.0);
    }
  }
  CHECK(run_scenario(train, test, splits, Method::tosca_r, cfg, 4).bank->config().reversed);
}

TEST_CASE("simplecil on separated clusters") {
  SynthParams p;
  p.num_classes = 20;
  p.n_train = 50;
  p.n_test = 20;
  const auto [train, test] = synth_gaussian(p);
  const auto splits = make_splits(train.classes(), 0, 5);
  const auto r = run_scenario(train, test, splits, Method::simplecil, {}, 1).report;
  CHECK(r.final_accuracy() >= 95.0);
}

TEST_CASE("scenario input validation") {
  const auto [train, test] = toy_data(4);
  SplitPlan bad{{{0, 1}, {1, 2, 3}}, 1};
  CHECK_THROWS(run_scenario(train, test, bad, Method::tosca, small_config(), 1));
}

TEST_CASE("bank file round trip and corruption") {
  oracle::TempDir tmp("bank_io");
  const auto [train, test] = toy_data(4);
  const auto cfg = small_config();
  auto bank = train_session(ModuleBank(train.d, cfg.r), of_classes(train, {0, 1}), {0, 1}, cfg, 1);
  bank = train_session(bank, of_classes(train, {2, 3}), {2, 3}, cfg, 2);

  save_bank(bank, tmp / "b.bin");
  const auto loaded = load_bank(tmp / "b.bin", cfg.luca);
  CHECK(loaded.entries() == bank.entries());
  const auto bytes = encode_bank(bank);
  CHECK(encode_bank(loaded) == bytes);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "LUCABANK");

  auto bad = bytes;
  bad[0] ^= 0xff;
  CHECK_THROWS_WITH_AS(decode_bank(bad), "not a bank file", FormatError);

  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> trunc(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_WITH_AS(decode_bank(trunc), "unexpected end of file", FormatError);
  }

  bad = bytes;
  bad[8] = 2;
  CHECK_THROWS_WITH_AS(decode_bank(bad), "unsupported version", FormatError);

  bad = bytes;
  bad[40] ^= 0x01;  // inside entry 1's matrices
  CHECK_THROWS_WITH_AS(decode_bank(bad), "checksum mismatch", FormatError);
}
