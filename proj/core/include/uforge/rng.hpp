#pragma once

#include <cstdint>
#include <string_view>

namespace uforge {

/// splitmix64 finalizer. Stateless; the basis of all randomness here.
std::uint64_t mix64(std::uint64_t x);

/// Stable 64-bit hash of (seed, name). Used to key named streams and to
/// derive per-trial seeds: trial seed = hash_stream(master_seed, "trial/<i>").
std::uint64_t hash_stream(std::uint64_t seed, std::string_view name);

/// Counter-based deterministic RNG. Draw i of stream (seed, name) is a pure
/// function of (seed, name, i), so independent streams never interact and
/// any stream can be replayed from its key alone.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view stream)
      : key_(hash_stream(seed, stream)) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double next_unit();

  /// Uniform in [lo, hi).
  double next_uniform(double lo, double hi);

  /// Standard normal via Box-Muller; consumes two uniforms per draw.
  double next_gaussian();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace uforge
