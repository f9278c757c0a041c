#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace can {

// Seeded random stream. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the conversions to uniform/normal/index values are
// done here rather than with std::*_distribution so a seed yields the same
// draws under every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; caches the second variate.
  double normal();
  // Uniform integer in [0, n); n must be > 0.
  std::size_t index(std::size_t n);

  // k distinct values from [0, n) in draw order (partial Fisher-Yates); k <= n.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent seed for a named stream ("lane") from a master seed
// using the SplitMix64 finalizer.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t lane);

}  // namespace can
