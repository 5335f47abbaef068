#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mtpgo::detail {

// mt19937_64 output is pinned by the standard; the standard distributions are
// not, so every draw here is hand-rolled for cross-platform determinism.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, n).
  std::uint64_t index(std::uint64_t n) { return eng_() % n; }

  // Uniform in [a, b), 53-bit resolution.
  double uniform(double a, double b) {
    return a + (b - a) * (static_cast<double>(eng_() >> 11) * 0x1.0p-53);
  }

  // Standard normal via Box-Muller; u1 kept away from zero.
  double normal() {
    const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double sigma) { return sigma * normal(); }

  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace mtpgo::detail
