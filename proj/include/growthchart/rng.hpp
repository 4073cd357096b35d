#pragma once

#include <cstdint>

namespace growthchart {

// Deterministic 64-bit RNG (xoshiro256** seeded via splitmix64) with
// explicit uniform and polar-method normal draws.  Results depend only on
// the seed and the call sequence, never on platform library internals, so
// seeded pipelines reproduce byte-identical output across reruns.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Standard normal via the Marsaglia polar method (second value cached).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Independent substream for subject/replication index i.  Derived by
  // mixing, so streams for different i never overlap in practice.
  static Rng substream(std::uint64_t seed, std::uint64_t i);

 private:
  std::uint64_t state_[4];
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// splitmix64 step, exposed for seed mixing.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace growthchart
