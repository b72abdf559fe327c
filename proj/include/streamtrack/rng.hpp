#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace streamtrack {

/// Seeded random stream with fully specified sampling, so a given seed
/// produces the same scenario on every platform. The engine (mt19937_64) is
/// pinned by the standard; the samplers below avoid std:: distributions,
/// whose output is implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    if (hi <= lo) {
      uniform();  // keep the draw count independent of the range
      return lo;
    }
    const double span = static_cast<double>(hi - lo) + 1.0;
    const int offset = static_cast<int>(uniform() * span);
    return lo + std::min(offset, hi - lo);
  }

  /// Box-Muller normal draw; always consumes exactly two uniforms.
  double normal(double sigma) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Knuth's Poisson sampler; draw count varies with the outcome.
  int poisson(double lambda) {
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace streamtrack
