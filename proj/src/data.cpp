#include "tosca/data.hpp"

#include <cmath>
#include <string>

#include "bytes.hpp"
#include "tosca/rng.hpp"

namespace tosca {

namespace {
constexpr std::string_view kFeatureMagic = "FTRSET01";
}

std::set<ClassId> FeatureDataset::classes() const {
  std::set<ClassId> out;
  for (const auto& s : samples) out.insert(s.label);
  return out;
}

FeatureDataset FeatureDataset::subset(const std::set<ClassId>& keep) const {
  FeatureDataset out{name, d, {}};
  for (const auto& s : samples) {
    if (keep.contains(s.label)) out.samples.push_back(s);
  }
  return out;
}

SplitPlan make_splits(const std::set<ClassId>& classes, std::size_t m, std::size_t n,
                      std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("split mismatch: increment must be positive");
  if (m > classes.size()) throw std::invalid_argument("split mismatch: initial stage larger than class set");
  if ((classes.size() - m) % n != 0) {
    throw std::invalid_argument("split mismatch: " + std::to_string(classes.size() - m) +
                                " classes do not divide into increments of " + std::to_string(n));
  }
  std::vector<ClassId> order(classes.begin(), classes.end());
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  SplitPlan plan;
  plan.seed = seed;
  std::size_t pos = 0;
  if (m > 0) {
    plan.stages.emplace_back(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
    pos = m;
  }
  for (; pos < order.size(); pos += n) {
    plan.stages.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                             order.begin() + static_cast<std::ptrdiff_t>(pos + n));
  }
  return plan;
}

void check_splits(const SplitPlan& plan, const std::set<ClassId>& classes) {
  if (plan.stages.empty()) throw std::invalid_argument("malformed splits: no stages");
  std::set<ClassId> seen;
  for (const auto& stage : plan.stages) {
    if (stage.empty()) throw std::invalid_argument("malformed splits: empty stage");
    for (ClassId c : stage) {
      if (!seen.insert(c).second) throw std::invalid_argument("malformed splits: class in two stages");
      if (!classes.contains(c)) throw std::invalid_argument("malformed splits: unknown class");
    }
  }
  if (seen != classes) throw std::invalid_argument("malformed splits: classes not covered");
}

std::pair<FeatureDataset, FeatureDataset> synth_gaussian(const SynthParams& p) {
  if (p.d < 2) throw std::invalid_argument("synth_gaussian: d must be >= 2");
  if (p.num_classes < 2) throw std::invalid_argument("synth_gaussian: need >= 2 classes");
  if (!(p.separation > 0.0) || !(p.sigma > 0.0)) {
    throw std::invalid_argument("synth_gaussian: separation and sigma must be positive");
  }
  // Three disjoint xoshiro substreams: means, train noise, test noise.
  Rng means_rng(p.seed);
  Rng train_rng = means_rng;
  train_rng.jump();
  Rng test_rng = train_rng;
  test_rng.jump();

  std::vector<std::vector<double>> means(p.num_classes, std::vector<double>(p.d));
  for (auto& mu : means) {
    double norm = 0.0;
    while (norm < 1e-12) {
      for (double& v : mu) v = means_rng.normal();
      norm = l2_norm(mu);
    }
    for (double& v : mu) v *= p.separation / norm;
  }

  auto draw = [&](Rng& rng, std::size_t per_class, const char* suffix) {
    FeatureDataset ds;
    ds.name = "synth-gaussian-" + std::string(suffix);
    ds.d = p.d;
    ds.samples.reserve(per_class * p.num_classes);
    for (std::size_t c = 0; c < p.num_classes; ++c) {
      for (std::size_t i = 0; i < per_class; ++i) {
        LabeledSample s{static_cast<ClassId>(c), RealVector(p.d)};
        for (std::size_t j = 0; j < p.d; ++j) {
          s.features[j] = static_cast<float>(means[c][j] + p.sigma * rng.normal());
        }
        ds.samples.push_back(std::move(s));
      }
    }
    return ds;
  };
  auto train = draw(train_rng, p.n_train, "train");
  auto test = draw(test_rng, p.n_test, "test");
  return {std::move(train), std::move(test)};
}

std::vector<std::uint8_t> encode_features(const FeatureDataset& ds) {
  if (ds.d > kMaxFeatureDim) throw std::invalid_argument("feature dimension exceeds format cap");
  detail::ByteWriter w;
  w.raw(kFeatureMagic);
  w.uint<std::uint32_t>(kFeatureFormatVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(ds.d));
  w.uint<std::uint64_t>(ds.samples.size());
  for (const auto& s : ds.samples) {
    if (s.features.size() != ds.d) throw std::invalid_argument("sample dimension does not match dataset");
    w.uint<std::uint32_t>(s.label);
    for (float v : s.features) w.f32(v);
  }
  return w.take();
}

FeatureDataset decode_features(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (!r.starts_with(kFeatureMagic)) {
    const bool prefix = bytes.size() < kFeatureMagic.size() &&
                        kFeatureMagic.starts_with(std::string_view(
                            reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    throw FormatError(prefix ? "unexpected end of file" : "not a feature file");
  }
  r.skip(kFeatureMagic.size());
  const auto version = r.uint<std::uint32_t>();
  if (version != kFeatureFormatVersion) throw FormatError("unsupported version");
  FeatureDataset ds;
  ds.d = r.uint<std::uint32_t>();
  if (ds.d > kMaxFeatureDim) throw FormatError("feature dimension exceeds format cap");
  const auto n = r.uint<std::uint64_t>();
  const std::uint64_t record = 4 + 4 * static_cast<std::uint64_t>(ds.d);
  if (n > r.remaining() / record) throw FormatError("unexpected end of file");
  ds.samples.resize(n);
  for (auto& s : ds.samples) {
    s.label = r.uint<std::uint32_t>();
    s.features.resize(ds.d);
    for (float& v : s.features) v = r.f32();
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after feature records");
  return ds;
}

void save_features(const FeatureDataset& ds, const std::filesystem::path& path) {
  detail::write_file(path, encode_features(ds));
}

FeatureDataset load_features(const std::filesystem::path& path) {
  auto ds = decode_features(detail::read_file(path));
  ds.name = path.stem().string();
  return ds;
}

}  // namespace tosca
