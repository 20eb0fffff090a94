#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace resdmd {

// Seeded RNG with hand-rolled distributions. std::uniform_real_distribution and
// std::normal_distribution are not pinned by the standard, so drawing through them
// would make "same seed, same bytes" contracts toolchain-dependent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // uniform in [0, 1) with 53-bit resolution
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller; reject u == 0 so log stays finite
    double u = 0.0;
    do {
      u = uniform01();
    } while (u == 0.0);
    const double v = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u));
    const double angle = 2.0 * M_PI * v;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // uniform integer in [0, n), rejection sampled
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t draw = 0;
    do {
      draw = gen_();
    } while (draw >= limit);
    return draw % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace resdmd
