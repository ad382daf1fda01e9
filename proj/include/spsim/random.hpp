#pragma once
// Counter-based random substreams. A generator is keyed by (seed, stage, key), so every
// pulse or event owns an independent stream and results do not depend on the order or
// thread in which pulses are processed.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace spsim {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stage tags separate the substreams used by different simulation steps.
enum class Stage : std::uint64_t {
  emission = 1,
  detection = 2,
  darks = 3,
  interference = 4,
  routing = 5,
  synthetic = 6,
};

class KeyedRng {
 public:
  KeyedRng(std::uint64_t seed, Stage stage, std::uint64_t key) noexcept
      : state_(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stage) ^ splitmix64(key)))) {}

  std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  double exponential(double mean) noexcept { return -mean * std::log(uniform()); }

  /// Standard normal by Box-Muller; one variate per call keeps the draw count fixed.
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Poisson by sequential inversion; intended for small means.
  std::uint64_t poisson(double mean) noexcept {
    if (mean <= 0.0) return 0;
    if (mean > 30.0) {
      // Split large means into independent chunks to keep exp(-mean) representable.
      std::uint64_t total = 0;
      double left = mean;
      while (left > 0.0) {
        const double part = left > 30.0 ? 30.0 : left;
        total += poisson(part);
        left -= part;
      }
      return total;
    }
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

 private:
  std::uint64_t state_;
};

}  // namespace spsim
