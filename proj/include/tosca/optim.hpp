#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tosca/data.hpp"
#include "tosca/heads.hpp"
#include "tosca/luca.hpp"

namespace tosca {

enum class L1Mode { subgradient, proximal };

const char* to_string(L1Mode mode);
L1Mode parse_l1_mode(const std::string& name);

/// Defaults are the published TOSCA training recipe.
struct OptimConfig {
  double lr_max = 0.025;
  double lr_min = 0.0;
  std::size_t epochs = 20;
  std::size_t batch_size = 48;
  double lambda_l1 = 5e-4;
  L1Mode l1_mode = L1Mode::subgradient;
  double momentum = 0.0;

  void validate() const;
};

/// Cosine annealing from lr_max at step 0 to lr_min at total_steps.
double cosine_lr(std::size_t step, std::size_t total_steps, const OptimConfig& cfg);

double soft_threshold(double v, double t);

/// One scalar SGD update with an L1 term, either as a subgradient
/// (sign(0) = 0) or as a proximal soft-threshold.
double sgd_l1_step(double theta, double grad, double lr, double lambda, L1Mode mode);

struct TrainOutcome {
  LucaModule module;
  SessionHead head;
  /// Per epoch: mean cross-entropy over the epoch's samples + lambda * L1 of
  /// the module at the end of the epoch.
  std::vector<double> loss_trace;
  std::size_t steps = 0;
};

/// Mini-batch SGD on cross-entropy through the head and the LuCA module, with
/// the L1 penalty on the four LuCA matrices only. The shuffle order for every
/// epoch comes from `shuffle_seed`. The last partial batch is kept.
TrainOutcome train_epochs(LucaModule module, SessionHead head, std::span<const LabeledSample> data,
                          const OptimConfig& cfg, std::uint64_t shuffle_seed);

}  // namespace tosca
