#pragma once

#include <cstdint>

namespace wdn {

/// Counter-based generator: draw i is splitmix64(seed, i), so a stream is fully
/// determined by (seed, position) and independent of thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  bool coin() { return (next_u64() >> 63) != 0; }
  /// Standard normal via Box-Muller.
  double normal();

  /// Independent stream for a worker: seed XOR worker id.
  Rng stream(std::uint64_t worker) const { return Rng(seed_ ^ worker); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace wdn
