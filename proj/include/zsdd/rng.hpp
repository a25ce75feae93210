#pragma once

// Seeded random source with a fully specified algorithm, so generated data is
// reproducible across compilers and standard libraries:
//  * engine: std::mt19937_64 (output sequence fixed by the C++ standard);
//  * substream seeds: SplitMix64 finalizer chained over (seed, tag, a, b);
//  * uniform: top 53 bits of one engine draw, scaled to [0, 1);
//  * normal: Box-Muller on (1 - u1, u2), cosine branch first, sine branch cached.
// std::normal_distribution is avoided because its algorithm is unspecified.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>

namespace zsdd {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t a = 0,
                                           std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ tag);
  h = splitmix64(h ^ a);
  return splitmix64(h ^ b);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (spare_) {
      double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
  }

private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

} // namespace zsdd
