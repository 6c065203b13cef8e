#pragma once

#include <cstdint>
#include <random>

namespace red {

// Seedable RNG with explicit distribution code on top of mt19937_64, so a
// seed produces the same stream on every standard library implementation
// (std::normal_distribution and friends are implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive, unbiased via rejection.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<int64_t>(eng_());  // full 64-bit span
    const uint64_t reject_below = (-range) % range;
    for (;;) {
      const uint64_t x = eng_();
      if (x >= reject_below) return lo + static_cast<int64_t>(x % range);
    }
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Derives an independent stream for a sub-task.
  Rng fork(uint64_t stream_id) {
    return Rng(eng_() ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1)));
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_{false};
  double spare_{0.0};
};

}  // namespace red
