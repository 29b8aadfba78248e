#include "uforge/rng.hpp"

#include <cmath>

namespace uforge {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t hash_stream(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name, folded into the seed through mix64.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return mix64(seed ^ mix64(h + kGolden));
}

std::uint64_t CounterRng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double CounterRng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::next_uniform(double lo, double hi) {
  return lo + (hi - lo) * next_unit();
}

double CounterRng::next_gaussian() {
  // Box-Muller; u clamped away from 0 so log stays finite.
  double u = next_unit();
  double v = next_unit();
  if (u <= 0.0) u = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

std::uint64_t CounterRng::next_below(std::uint64_t n) {
  // Rejection-free modulo is fine here: n is tiny relative to 2^64, the
  // bias is < n/2^64 and irrelevant for experiment seeding.
  return next_u64() % n;
}

}  // namespace uforge
