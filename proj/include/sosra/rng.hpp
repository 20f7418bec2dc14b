#pragma once

// Portable pseudo-random source used by every sampling routine in sosra.
//
// The raw engine is std::mt19937_64, whose output sequence is fixed by the
// C++ standard. The standard distributions are not (they differ between
// library vendors), so all derived draws are computed here:
//
//   uniform()      (u >> 11) * 2^-53                       in [0, 1)
//   uniform_int(n) rejection sampling on the raw 64-bit output
//   normal()       Box-Muller, cosine branch only, u1 = 1 - uniform()
//   sign()         +1 if the top bit of the raw output is set, else -1
//
// Any reimplementation following these rules reproduces our instances.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>

namespace sosra {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  int sign() { return (engine_() >> 63) != 0 ? 1 : -1; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sosra
