#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace rldyn {

/// Deterministic xoshiro256++ generator with explicit Box-Muller normals.
/// The standard library distributions are implementation-defined, so all
/// sampling goes through this class to keep runs bit-reproducible across
/// toolchains.
///
/// A run owns one root seed; every consumer of randomness (each environment,
/// action sampling, minibatch shuffling, capacity probes, ...) works on its
/// own named stream derived from the root, so changing how often one consumer
/// draws never perturbs the others.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Derive an independent stream from a root seed and a stream name,
  /// e.g. derive(seed, "env/3") or derive(seed, "shuffle").
  static Rng derive(std::uint64_t root_seed, std::string_view stream_name);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);

  /// Standard normal via Box-Muller (two uniforms per draw, no caching).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// In-place Fisher-Yates shuffle of an index vector.
  void shuffle(std::vector<std::size_t>& v);

 private:
  std::uint64_t s_[4];
};

/// SplitMix64 step; exposed because seeding helpers outside Rng reuse it.
std::uint64_t splitmix64(std::uint64_t& state);

/// Stateless counter-based split: an independent child seed from a root
/// seed and an index.
std::uint64_t splitmix_seed(std::uint64_t root, std::uint64_t index);

}  // namespace rldyn
