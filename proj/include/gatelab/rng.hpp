#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace gatelab {

/// SplitMix64 generator (Steele, Lea & Flood). 64-bit state, one add and a
/// finalizer per draw; `split()` derives an independent child stream, which
/// is how every generator in the library fans a user seed out into
/// per-purpose streams.
///
/// Satisfies UniformRandomBitGenerator so it composes with <random>
/// distributions. Reproducible within one standard library build; no attempt
/// is made at cross-platform bit-exactness of the std distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Child stream; advances this generator by one draw.
  Rng split();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Mixes a base seed with a purpose tag so different consumers of the same
/// user seed (graph, features, init, ...) get unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace gatelab
