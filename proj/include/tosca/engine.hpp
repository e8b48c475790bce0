#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tosca/data.hpp"
#include "tosca/heads.hpp"
#include "tosca/luca.hpp"
#include "tosca/optim.hpp"

namespace tosca {

/// Everything a scenario needs besides data and seed.
struct EngineConfig {
  std::size_t r = 48;
  LucaConfig luca;
  OptimConfig optim;
  /// Divide each session's entropy by ln|Y_b| when sessions have unequal
  /// class counts.
  bool normalize_entropy = true;
  /// Session priors for selection; empty means uniform.
  std::vector<double> priors;
};

/// One trained session: its LuCA module and its head. Class ids live in the
/// head.
struct BankEntry {
  std::uint32_t session_index = 0;
  LucaModule module;
  SessionHead head;

  const std::vector<ClassId>& class_ids() const { return head.class_ids; }
  friend bool operator==(const BankEntry&, const BankEntry&) = default;
};

/// Append-only collection of trained sessions. Entries never change after
/// they are appended.
class ModuleBank {
 public:
  ModuleBank(std::size_t d, std::size_t r, LucaConfig config = {});

  std::size_t feature_dim() const { return d_; }
  std::size_t rank() const { return r_; }
  const LucaConfig& config() const { return config_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const BankEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<BankEntry>& entries() const { return entries_; }

  /// Validates shapes, disjoint classes, and consecutive session index.
  void append(BankEntry entry);

  bool has_class(ClassId id) const;
  /// Session index (1-based) owning a class, or 0.
  std::uint32_t session_of(ClassId id) const;

 private:
  std::size_t d_;
  std::size_t r_;
  LucaConfig config_;
  std::vector<BankEntry> entries_;
};

/// Trains a fresh module + zero head on one session's data and appends it.
/// Only `data` is read; earlier sessions' samples are never needed.
ModuleBank train_session(ModuleBank bank, std::span<const LabeledSample> data,
                         const std::vector<ClassId>& class_ids, const EngineConfig& cfg,
                         std::uint64_t seed);

/// Trainable scalars one session adds: 4dr + d|Y_b|.
std::size_t session_trainable_count(std::size_t d, std::size_t r, std::size_t num_classes);

struct Prediction {
  ClassId class_id = 0;
  std::uint32_t chosen_session = 0;  // 1-based
  std::vector<double> per_session_entropy;
  std::vector<ProbVector> per_session_distribution;
};

struct PredictOptions {
  bool normalize_entropy = true;
  std::vector<double> priors;
};

/// Runs every session's module and head on one shared feature vector, picks
/// the session with minimal entropy (lowest index on ties), and returns that
/// session's argmax class (lowest class id on ties).
Prediction predict(std::span<const float> features, const ModuleBank& bank,
                   const PredictOptions& opts = {});

/// Same as predict, but pulls the frozen feature from `extract` exactly once.
Prediction predict_with(const std::function<RealVector()>& extract, const ModuleBank& bank,
                        const PredictOptions& opts = {});

struct StageResult {
  std::size_t index = 0;  // 1-based
  double accuracy = 0.0;  // percent
  std::optional<double> selection_accuracy;
  std::size_t params_added = 0;
};

/// Top-1 accuracy (percent) over `test` plus the fraction routed to the
/// session owning each sample's label.
StageResult evaluate_stage(const ModuleBank& bank, std::span<const LabeledSample> test,
                           const PredictOptions& opts = {});

/// Mean pairwise |cosine| between flattened LuCA parameter vectors.
double module_orthogonality(const ModuleBank& bank);

/// Mean sparsity_ratio over the bank's modules, weighted by entry count.
double bank_sparsity(const ModuleBank& bank, double threshold);

enum class Method { tosca, tosca_r, finetune, joint, simplecil };

const char* to_string(Method m);
Method parse_method(const std::string& name);

struct ScenarioReport {
  Method method = Method::tosca;
  std::uint64_t seed = 0;
  EngineConfig config;
  std::string dataset;
  std::vector<std::vector<ClassId>> splits;
  std::vector<StageResult> stages;
  double average_accuracy = 0.0;
  std::size_t params_per_task = 0;
  double wall_time_s = 0.0;
  // Diagnostics, present for bank-based methods.
  std::optional<double> orthogonality;
  std::optional<double> sparsity;
  /// Mean ||L_b(x) - x|| / ||x|| over each session's own test samples.
  std::vector<double> feature_shift;

  double final_accuracy() const { return stages.empty() ? 0.0 : stages.back().accuracy; }
};

struct ScenarioResult {
  ScenarioReport report;
  /// The trained bank for tosca / tosca_r.
  std::optional<ModuleBank> bank;
};

ScenarioResult run_scenario(const FeatureDataset& train, const FeatureDataset& test,
                            const SplitPlan& splits, Method method, const EngineConfig& cfg,
                            std::uint64_t seed);

/// Mean of per-stage accuracies.
double average_accuracy(std::span<const StageResult> stages);

constexpr std::uint32_t kBankFormatVersion = 1;

/// FNV-1a 64 over an entry's serialized bytes.
std::uint64_t entry_checksum(const BankEntry& entry);

std::vector<std::uint8_t> encode_bank(const ModuleBank& bank);
/// The file stores no activation/order flags, so the caller supplies them.
ModuleBank decode_bank(std::span<const std::uint8_t> bytes, const LucaConfig& config = {});
void save_bank(const ModuleBank& bank, const std::filesystem::path& path);
ModuleBank load_bank(const std::filesystem::path& path, const LucaConfig& config = {});

}  // namespace tosca
