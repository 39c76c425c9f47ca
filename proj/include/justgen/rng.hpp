#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace justgen {

// Deterministic RNG used everywhere randomness is needed.  mt19937_64 output
// is fully specified by the standard; the distributions (bounded ints via
// rejection sampling, normals via Box-Muller) are hand-rolled because the
// std::*_distribution adapters are not bit-reproducible across library
// implementations and checkpoints must be.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, n).  n must be > 0.
  uint64_t uniform(uint64_t n) {
    const uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
    uint64_t v = eng_();
    while (v >= limit) v = eng_();
    return v % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform_real() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; draws two uniforms per pair of values.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform_real();
    while (u1 <= 0.0) u1 = uniform_real();
    const double u2 = uniform_real();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace justgen
