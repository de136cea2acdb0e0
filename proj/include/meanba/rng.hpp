#pragma once

#include <cstdint>
#include <random>

namespace meanba {

// Seeded generator with platform-independent output. std::mt19937_64 is fully
// specified by the standard; the distribution classes are not, so uniform
// variates are derived from the raw bits here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 bits of resolution.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  std::uint64_t bits() { return engine_(); }
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace meanba
