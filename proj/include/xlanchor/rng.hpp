#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace xlanchor {

// SplitMix64 stream. next_u64, uniform and below use only integer arithmetic
// and exact conversions, so a seed yields the same values on every platform.
// normal() goes through libm log/cos and is reproducible per platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  // Independent stream derived from this one's seed material and a tag.
  Rng fork(std::uint64_t tag) const;

  std::uint64_t state() const noexcept { return state_; }
  void set_state(std::uint64_t s) noexcept { state_ = s; }

 private:
  std::uint64_t state_;
};

// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace xlanchor
