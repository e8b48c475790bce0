#pragma once

#include <array>
#include <cstdint>

namespace tosca {

/// splitmix64 step. Used to expand a 64-bit seed into generator state and to
/// derive child seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Derives an independent seed from (seed, tag) by two splitmix64 rounds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// xoshiro256** 1.0 seeded through splitmix64. This exact algorithm is part of
/// the reproducibility contract: every stream in the project is drawn from it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform in [0, 1) with 53 random bits: (next() >> 11) * 2^-53.
  double uniform();

  /// Uniform integer in [0, bound) by rejection on the top of the range.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via Box-Muller. Each call consumes two uniforms and
  /// returns the cosine branch; no cached spare, so streams stay positional.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Advances the stream by 2^128 draws (reference xoshiro256 jump polynomial).
  void jump();

  const std::array<std::uint64_t, 4>& state() const { return s_; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace tosca
