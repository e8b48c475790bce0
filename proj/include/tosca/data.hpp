#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tosca/numerics.hpp"

namespace tosca {

using ClassId = std::uint32_t;

struct LabeledSample {
  ClassId label = 0;
  RealVector features;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

/// Frozen-backbone embeddings with labels.
struct FeatureDataset {
  std::string name;
  std::size_t d = 0;
  std::vector<LabeledSample> samples;

  std::size_t size() const { return samples.size(); }
  std::set<ClassId> classes() const;
  /// Samples whose label is in `keep`, in original order.
  FeatureDataset subset(const std::set<ClassId>& keep) const;

  friend bool operator==(const FeatureDataset&, const FeatureDataset&) = default;
};

/// Raised on malformed feature or bank files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Class order for a B-m Inc-n protocol.
struct SplitPlan {
  std::vector<std::vector<ClassId>> stages;
  std::uint64_t seed = 0;

  std::size_t num_stages() const { return stages.size(); }
};

constexpr std::uint64_t kDefaultSplitSeed = 1993;

/// Shuffles classes with a seeded Fisher-Yates, then cuts a first stage of m
/// classes (skipped when m == 0) followed by chunks of n. The remainder must
/// divide evenly.
SplitPlan make_splits(const std::set<ClassId>& classes, std::size_t m, std::size_t n,
                      std::uint64_t seed = kDefaultSplitSeed);

/// Validates that a plan partitions `classes` into disjoint nonempty stages.
void check_splits(const SplitPlan& plan, const std::set<ClassId>& classes);

struct SynthParams {
  std::size_t d = 32;
  std::size_t num_classes = 50;
  std::size_t n_train = 100;
  std::size_t n_test = 50;
  double separation = 6.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

/// Gaussian class clusters with means on the sphere of radius `separation`.
std::pair<FeatureDataset, FeatureDataset> synth_gaussian(const SynthParams& params);

constexpr std::uint32_t kFeatureFormatVersion = 1;
constexpr std::size_t kMaxFeatureDim = std::size_t{1} << 20;

/// "FTRSET01", u32 version, u32 d, u64 n, then n x (u32 label, d x f32), all
/// little-endian.
void save_features(const FeatureDataset& ds, const std::filesystem::path& path);
FeatureDataset load_features(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_features(const FeatureDataset& ds);
FeatureDataset decode_features(std::span<const std::uint8_t> bytes);

}  // namespace tosca
