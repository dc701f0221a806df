#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace adkit {

// Seeded generator whose derived variates are identical on every standard
// library. std::*_distribution output is implementation-defined, so uniform
// and normal draws are built directly on the 64-bit Mersenne twister.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : engine_(seed)
  {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n)
  {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit)
      x = engine_();
    return x % n;
  }

  // Box-Muller; the second variate is cached.
  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
      u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace adkit
