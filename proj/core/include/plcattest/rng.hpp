#pragma once

#include <cstdint>
#include <random>

namespace plcattest {

/// Seeded pseudo-random stream with platform-independent sampling.
///
/// The standard distributions are implementation-defined, so all draws here
/// are derived directly from the raw mt19937_64 output. Every experiment in
/// the library takes an explicit seed and owns its Rng.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform01();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  bool coin() { return (next() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finaliser; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace plcattest
