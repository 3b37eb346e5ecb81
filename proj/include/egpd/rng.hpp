#pragma once

#include <array>
#include <cstdint>

namespace egpd {

/// Deterministic 64-bit generator (xoshiro256**) seeded through SplitMix64.
///
/// Every stream is a pure function of (seed, stream), so parallel runs can
/// derive independent generators without sharing state. Uniform and Poisson
/// variates are produced by code in this file rather than by <random>
/// distributions, whose output is implementation-defined; traces are
/// therefore reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Poisson variate. Inversion for small means, PTRS (Hormann 1993) above 10.
  std::uint64_t poisson(double mean);

  /// Seed for sub-stream `index` of `seed`; used to split sweeps and replicates.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index);

 private:
  std::uint64_t poisson_inversion(double mean);
  std::uint64_t poisson_ptrs(double mean);

  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace egpd
