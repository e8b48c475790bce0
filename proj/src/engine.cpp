#include "tosca/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "bytes.hpp"
#include "tosca/batch.hpp"
#include "tosca/rng.hpp"

namespace tosca {

// ---------------------------------------------------------------------------
// ModuleBank

ModuleBank::ModuleBank(std::size_t d, std::size_t r, LucaConfig config)
    : d_(d), r_(r), config_(config) {
  if (d == 0 || r == 0) throw std::invalid_argument("module bank: d and r must be positive");
}

void ModuleBank::append(BankEntry entry) {
  const auto& m = entry.module;
  if (m.d != d_ || m.r != r_ || m.w_down.rows != d_ || m.w_down.cols != r_ || m.w_up.rows != r_ ||
      m.w_up.cols != d_ || m.v_down.rows != d_ || m.v_down.cols != r_ || m.v_up.rows != r_ ||
      m.v_up.cols != d_) {
    throw std::invalid_argument("module bank: module shape does not match bank");
  }
  if (entry.head.w.rows != d_ || entry.head.w.cols != entry.head.class_ids.size() ||
      entry.head.class_ids.empty()) {
    throw std::invalid_argument("module bank: head shape does not match bank");
  }
  if (entry.session_index != entries_.size() + 1) {
    throw std::invalid_argument("module bank: session indices must be consecutive from 1");
  }
  for (ClassId c : entry.class_ids()) {
    if (has_class(c)) {
      throw std::invalid_argument("overlapping classes: class " + std::to_string(c) +
                                  " already belongs to an earlier session");
    }
  }
  entry.module.config = config_;
  entries_.push_back(std::move(entry));
}

bool ModuleBank::has_class(ClassId id) const { return session_of(id) != 0; }

std::uint32_t ModuleBank::session_of(ClassId id) const {
  for (const auto& e : entries_) {
    if (e.head.column_of(id) != SessionHead::npos) return e.session_index;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Training

std::size_t session_trainable_count(std::size_t d, std::size_t r, std::size_t num_classes) {
  return param_count(d, r) + d * num_classes;
}

ModuleBank train_session(ModuleBank bank, std::span<const LabeledSample> data,
                         const std::vector<ClassId>& class_ids, const EngineConfig& cfg,
                         std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("train_session: empty session data");
  if (class_ids.empty()) throw std::invalid_argument("train_session: empty class set");
  for (ClassId c : class_ids) {
    if (bank.has_class(c)) {
      throw std::invalid_argument("overlapping classes: class " + std::to_string(c) +
                                  " already belongs to an earlier session");
    }
  }
  const std::size_t d = bank.feature_dim();
  auto module = init_luca(d, bank.rank(), bank.config(), derive_seed(seed, 1));
  SessionHead head(d, class_ids);
  auto trained = train_epochs(std::move(module), std::move(head), data, cfg.optim, derive_seed(seed, 2));
  bank.append(BankEntry{static_cast<std::uint32_t>(bank.size() + 1), std::move(trained.module),
                        std::move(trained.head)});
  return bank;
}

// ---------------------------------------------------------------------------
// Inference

Prediction predict(std::span<const float> features, const ModuleBank& bank,
                   const PredictOptions& opts) {
  if (bank.empty()) throw std::invalid_argument("predict: empty bank");
  if (features.size() != bank.feature_dim()) throw std::invalid_argument("predict: dimension mismatch");
  const std::size_t sessions = bank.size();
  if (!opts.priors.empty() && opts.priors.size() != sessions) {
    throw std::invalid_argument("predict: one prior per session required");
  }

  bool unequal = false;
  for (const auto& e : bank.entries()) {
    unequal |= e.head.num_classes() != bank[0].head.num_classes();
  }
  const bool normalize = opts.normalize_entropy && unequal;

  Prediction out;
  out.per_session_entropy.resize(sessions);
  out.per_session_distribution.resize(sessions);
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < sessions; ++b) {
    const auto& e = bank[b];
    const auto phi = luca_forward(features, e.module);
    auto p = softmax(head_forward(std::span<const double>(phi), e.head));
    const double h = shannon_entropy(p);
    double score = h;
    if (normalize) {
      const double k = static_cast<double>(e.head.num_classes());
      score = k > 1.0 ? h / std::log(k) : 0.0;
    }
    if (!opts.priors.empty()) score -= std::log(static_cast<double>(sessions) * opts.priors[b]);
    out.per_session_entropy[b] = h;
    out.per_session_distribution[b] = std::move(p);
    if (score < best_score) {
      best_score = score;
      best = b;
    }
  }
  const auto& chosen = bank[best];
  out.chosen_session = chosen.session_index;
  out.class_id =
      chosen.head.class_ids[best_column(out.per_session_distribution[best], chosen.head.class_ids)];
  return out;
}

Prediction predict_with(const std::function<RealVector()>& extract, const ModuleBank& bank,
                        const PredictOptions& opts) {
  const RealVector features = extract();
  return predict(features, bank, opts);
}

StageResult evaluate_stage(const ModuleBank& bank, std::span<const LabeledSample> test,
                           const PredictOptions& opts) {
  if (test.empty()) throw std::invalid_argument("evaluate_stage: empty test set");
  for (const auto& s : test) {
    if (!bank.has_class(s.label)) {
      throw std::invalid_argument("evaluate_stage: test label " + std::to_string(s.label) +
                                  " not covered by the bank");
    }
  }
  const auto preds = predict_batch(bank, test, opts);
  std::size_t correct = 0, routed = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    correct += preds[i].class_id == test[i].label;
    routed += preds[i].chosen_session == bank.session_of(test[i].label);
  }
  const double n = static_cast<double>(test.size());
  StageResult r;
  r.index = bank.size();
  r.accuracy = 100.0 * static_cast<double>(correct) / n;
  r.selection_accuracy = 100.0 * static_cast<double>(routed) / n;
  return r;
}

double module_orthogonality(const ModuleBank& bank) {
  if (bank.size() < 2) throw std::invalid_argument("module_orthogonality: need at least 2 entries");
  std::vector<std::vector<double>> flat;
  std::vector<double> norms;
  for (const auto& e : bank.entries()) {
    flat.push_back(flatten(e.module));
    norms.push_back(l2_norm(flat.back()));
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < flat.size(); ++a) {
    for (std::size_t b = a + 1; b < flat.size(); ++b) {
      // A zero vector has no direction; count it as orthogonal.
      if (norms[a] > 0.0 && norms[b] > 0.0) {
        total += std::min(1.0, std::abs(dot(flat[a], flat[b])) / (norms[a] * norms[b]));
      }
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

double bank_sparsity(const ModuleBank& bank, double threshold) {
  if (bank.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : bank.entries()) total += sparsity_ratio(e.module, threshold);
  return total / static_cast<double>(bank.size());
}

// ---------------------------------------------------------------------------
// Scenarios

const char* to_string(Method m) {
  switch (m) {
    case Method::tosca: return "tosca";
    case Method::tosca_r: return "tosca_r";
    case Method::finetune: return "finetune";
    case Method::joint: return "joint";
    case Method::simplecil: return "simplecil";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::tosca, Method::tosca_r, Method::finetune, Method::joint, Method::simplecil}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown method: " + name);
}

double average_accuracy(std::span<const StageResult> stages) {
  if (stages.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : stages) total += s.accuracy;
  return total / static_cast<double>(stages.size());
}

namespace {

double percent_correct(std::span<const ClassId> predicted, std::span<const LabeledSample> test) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) correct += predicted[i] == test[i].label;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

std::vector<std::size_t> columns_for(const SessionHead& head, const std::set<ClassId>& seen) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < head.class_ids.size(); ++j) {
    if (seen.contains(head.class_ids[j])) cols.push_back(j);
  }
  return cols;
}

// Mean relative displacement ||L(x) - x|| / ||x|| of each session's module on
// that session's own test samples.
std::vector<double> feature_shift(const ModuleBank& bank, const FeatureDataset& test) {
  std::vector<double> shift;
  for (const auto& e : bank.entries()) {
    const std::set<ClassId> own(e.class_ids().begin(), e.class_ids().end());
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& s : test.samples) {
      if (!own.contains(s.label)) continue;
      const std::vector<double> x(s.features.begin(), s.features.end());
      const double xn = l2_norm(x);
      if (xn == 0.0) continue;
      auto y = luca_forward(std::span<const float>(s.features), e.module);
      for (std::size_t j = 0; j < y.size(); ++j) y[j] -= x[j];
      total += l2_norm(y) / xn;
      ++count;
    }
    shift.push_back(count ? total / static_cast<double>(count) : 0.0);
  }
  return shift;
}

void run_bank_method(const FeatureDataset& train, const FeatureDataset& test, const SplitPlan& splits,
                     EngineConfig cfg, std::uint64_t seed, bool reversed, ScenarioResult& result) {
  cfg.luca.reversed = reversed;
  const PredictOptions opts{cfg.normalize_entropy, cfg.priors};
  ModuleBank bank(train.d, cfg.r, cfg.luca);
  std::set<ClassId> seen;
  for (std::size_t b = 0; b < splits.num_stages(); ++b) {
    const auto& stage = splits.stages[b];
    const std::set<ClassId> stage_set(stage.begin(), stage.end());
    const auto data = train.subset(stage_set);
    bank = train_session(std::move(bank), data.samples, stage, cfg, derive_seed(seed, b + 1));
    seen.insert(stage.begin(), stage.end());
    auto stage_result = evaluate_stage(bank, test.subset(seen).samples, opts);
    stage_result.params_added = session_trainable_count(train.d, cfg.r, stage.size());
    result.report.stages.push_back(stage_result);
  }
  if (bank.size() >= 2) result.report.orthogonality = module_orthogonality(bank);
  result.report.sparsity = bank_sparsity(bank, 1e-3);
  result.report.feature_shift = feature_shift(bank, test);
  result.report.params_per_task = param_count(train.d, cfg.r);
  result.bank = std::move(bank);
}

// One shared module and one head that grows by each session's classes, trained
// on each session's data in turn with cross-entropy over every class seen so
// far. Nothing protects earlier classes, so this is the forgetting lower bound.
void run_finetune(const FeatureDataset& train, const FeatureDataset& test, const SplitPlan& splits,
                  const EngineConfig& cfg, std::uint64_t seed, ScenarioReport& report) {
  auto module = init_luca(train.d, cfg.r, cfg.luca, derive_seed(seed, 1));
  SessionHead head;
  std::set<ClassId> seen;
  for (std::size_t b = 0; b < splits.num_stages(); ++b) {
    const auto& stage = splits.stages[b];
    std::vector<ClassId> ids = head.class_ids;
    ids.insert(ids.end(), stage.begin(), stage.end());
    SessionHead grown(train.d, ids);
    for (std::size_t i = 0; i < train.d; ++i) {
      for (std::size_t j = 0; j < head.num_classes(); ++j) grown.w(i, j) = head.w(i, j);
    }
    const std::set<ClassId> stage_set(stage.begin(), stage.end());
    const auto data = train.subset(stage_set);
    auto trained = train_epochs(std::move(module), std::move(grown), data.samples, cfg.optim,
                                derive_seed(seed, 100 + b));
    module = std::move(trained.module);
    head = std::move(trained.head);

    seen.insert(stage.begin(), stage.end());
    const auto seen_test = test.subset(seen);
    const auto predicted = classify_batch(module, head, seen_test.samples);
    StageResult r;
    r.index = b + 1;
    r.accuracy = percent_correct(predicted, seen_test.samples);
    r.params_added = b == 0 ? session_trainable_count(train.d, cfg.r, stage.size()) : train.d * stage.size();
    report.stages.push_back(r);
  }
  report.params_per_task = param_count(train.d, cfg.r);
}

// One module and one head trained once on every session's data. Stage b is
// scored on the classes seen so far, with prediction restricted to them.
void run_joint(const FeatureDataset& train, const FeatureDataset& test, const SplitPlan& splits,
               const EngineConfig& cfg, std::uint64_t seed, ScenarioReport& report) {
  std::vector<ClassId> all;
  for (const auto& stage : splits.stages) all.insert(all.end(), stage.begin(), stage.end());
  auto module = init_luca(train.d, cfg.r, cfg.luca, derive_seed(seed, 1));
  SessionHead head(train.d, all);
  const auto data = train.subset(std::set<ClassId>(all.begin(), all.end()));
  auto trained = train_epochs(std::move(module), std::move(head), data.samples, cfg.optim,
                              derive_seed(seed, 2));
  std::set<ClassId> seen;
  for (std::size_t b = 0; b < splits.num_stages(); ++b) {
    seen.insert(splits.stages[b].begin(), splits.stages[b].end());
    const auto seen_test = test.subset(seen);
    const auto cols = columns_for(trained.head, seen);
    const auto predicted = classify_batch(trained.module, trained.head, seen_test.samples, cols);
    StageResult r;
    r.index = b + 1;
    r.accuracy = percent_correct(predicted, seen_test.samples);
    r.params_added = b == 0 ? session_trainable_count(train.d, cfg.r, all.size()) : 0;
    report.stages.push_back(r);
  }
  report.params_per_task = param_count(train.d, cfg.r);
}

void run_simplecil(const FeatureDataset& train, const FeatureDataset& test, const SplitPlan& splits,
                   ScenarioReport& report) {
  std::set<ClassId> seen;
  for (std::size_t b = 0; b < splits.num_stages(); ++b) {
    seen.insert(splits.stages[b].begin(), splits.stages[b].end());
    // Prototypes depend only on each class's own samples, so rebuilding over
    // all seen classes equals accumulating session by session.
    const auto bank = build_prototypes(train.subset(seen).samples);
    const auto seen_test = test.subset(seen);
    const auto predicted = parallel_map<ClassId>(seen_test.size(), [&](std::size_t i) {
      return prototype_classify(seen_test.samples[i].features, bank);
    });
    StageResult r;
    r.index = b + 1;
    r.accuracy = percent_correct(predicted, seen_test.samples);
    report.stages.push_back(r);
  }
  report.params_per_task = 0;
}

}  // namespace

ScenarioResult run_scenario(const FeatureDataset& train, const FeatureDataset& test,
                            const SplitPlan& splits, Method method, const EngineConfig& cfg,
                            std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  if (train.d == 0 || test.d != train.d) throw std::invalid_argument("run_scenario: dimension mismatch");
  cfg.optim.validate();
  const auto classes = train.classes();
  check_splits(splits, classes);
  for (const auto& stage : splits.stages) {
    for (ClassId c : stage) {
      const bool in_test = std::any_of(test.samples.begin(), test.samples.end(),
                                       [c](const LabeledSample& s) { return s.label == c; });
      if (!in_test) throw std::invalid_argument("malformed splits: class missing from test set");
    }
  }

  ScenarioResult result;
  auto& report = result.report;
  report.method = method;
  report.seed = seed;
  report.config = cfg;
  report.dataset = train.name;
  report.splits = splits.stages;
  switch (method) {
    case Method::tosca: run_bank_method(train, test, splits, cfg, seed, false, result); break;
    case Method::tosca_r: run_bank_method(train, test, splits, cfg, seed, true, result); break;
    case Method::finetune: run_finetune(train, test, splits, cfg, seed, report); break;
    case Method::joint: run_joint(train, test, splits, cfg, seed, report); break;
    case Method::simplecil: run_simplecil(train, test, splits, report); break;
  }
  if (method == Method::tosca_r) report.config.luca.reversed = true;
  report.average_accuracy = average_accuracy(report.stages);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// ---------------------------------------------------------------------------
// Bank file

namespace {

constexpr std::string_view kBankMagic = "LUCABANK";

void write_matrix(detail::ByteWriter& w, const RealMatrix& m) {
  for (float v : m.values) w.f32(v);
}

void read_matrix(detail::ByteReader& r, RealMatrix& m) {
  for (float& v : m.values) v = r.f32();
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_entry_body(detail::ByteWriter& w, const BankEntry& e) {
  w.uint<std::uint32_t>(e.session_index);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(e.head.num_classes()));
  for (ClassId c : e.head.class_ids) w.uint<std::uint32_t>(c);
  write_matrix(w, e.module.w_down);
  write_matrix(w, e.module.w_up);
  write_matrix(w, e.module.v_down);
  write_matrix(w, e.module.v_up);
  write_matrix(w, e.head.w);
}

}  // namespace

std::uint64_t entry_checksum(const BankEntry& entry) {
  detail::ByteWriter w;
  write_entry_body(w, entry);
  return fnv1a(w.bytes_from(0));
}

std::vector<std::uint8_t> encode_bank(const ModuleBank& bank) {
  detail::ByteWriter w;
  w.raw(kBankMagic);
  w.uint<std::uint32_t>(kBankFormatVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(bank.feature_dim()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(bank.rank()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(bank.size()));
  for (const auto& e : bank.entries()) {
    const std::size_t start = w.size();
    write_entry_body(w, e);
    w.uint<std::uint64_t>(fnv1a(w.bytes_from(start)));
  }
  return w.take();
}

ModuleBank decode_bank(std::span<const std::uint8_t> bytes, const LucaConfig& config) {
  detail::ByteReader r(bytes);
  if (!r.starts_with(kBankMagic)) {
    const bool prefix = bytes.size() < kBankMagic.size() &&
                        kBankMagic.starts_with(std::string_view(
                            reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    throw FormatError(prefix ? "unexpected end of file" : "not a bank file");
  }
  r.skip(kBankMagic.size());
  if (r.uint<std::uint32_t>() != kBankFormatVersion) throw FormatError("unsupported version");
  const std::size_t d = r.uint<std::uint32_t>();
  const std::size_t rank = r.uint<std::uint32_t>();
  const std::size_t count = r.uint<std::uint32_t>();
  if (d == 0 || rank == 0) throw FormatError("bank file has zero dimension");
  ModuleBank bank(d, rank, config);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = r.pos();
    BankEntry e;
    e.session_index = r.uint<std::uint32_t>();
    const std::size_t k = r.uint<std::uint32_t>();
    if (k > r.remaining() / 4) throw FormatError("unexpected end of file");
    std::vector<ClassId> ids(k);
    for (auto& c : ids) c = r.uint<std::uint32_t>();
    e.module = LucaModule(d, rank, config);
    read_matrix(r, e.module.w_down);
    read_matrix(r, e.module.w_up);
    read_matrix(r, e.module.v_down);
    read_matrix(r, e.module.v_up);
    try {
      e.head = SessionHead(d, std::move(ids));
    } catch (const std::invalid_argument& ex) {
      throw FormatError(std::string("bad bank entry: ") + ex.what());
    }
    read_matrix(r, e.head.w);
    const auto expected = fnv1a(r.slice(start, r.pos()));
    if (r.uint<std::uint64_t>() != expected) throw FormatError("checksum mismatch");
    try {
      bank.append(std::move(e));
    } catch (const std::invalid_argument& ex) {
      throw FormatError(std::string("bad bank entry: ") + ex.what());
    }
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after bank entries");
  return bank;
}

void save_bank(const ModuleBank& bank, const std::filesystem::path& path) {
  detail::write_file(path, encode_bank(bank));
}

ModuleBank load_bank(const std::filesystem::path& path, const LucaConfig& config) {
  return decode_bank(detail::read_file(path), config);
}

}  // namespace tosca
