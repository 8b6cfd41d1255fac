#pragma once

#include <cmath>
#include <cstdint>

namespace ustat {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of instance `k` under master seed `master`:
///   splitmix64(master ^ splitmix64(k + 1)).
/// Instance k is therefore reproducible without generating 0..k-1.
inline constexpr std::uint64_t instance_seed(std::uint64_t master, std::uint64_t k) {
  return splitmix64(master ^ splitmix64(k + 1));
}

/// Counter-based generator: draw d of stream (seed, stream) is
/// splitmix64(key + d * golden) with key = splitmix64(seed ^ splitmix64(stream)).
/// All variates are derived from raw bits here, so sequences are identical
/// across standard libraries.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(splitmix64(seed ^ splitmix64(stream ^ 0xD1B54A32D192ED03ULL))) {}

  std::uint64_t next() {
    return splitmix64(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool coin() { return (next() >> 63) != 0; }

  /// Standard normal by Box-Muller (one variate per call).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ustat
