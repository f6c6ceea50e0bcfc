#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace ehrgmtl {

// Deterministic random source used everywhere seeded behavior is promised.
//
// The engine is std::mt19937_64, which the standard pins bit-for-bit. All
// mappings from raw 64-bit words to draws are defined here instead of via
// std::*_distribution (whose algorithms are implementation-defined), so a
// given seed reproduces the same stream on any platform:
//   uniform double : (word >> 11) * 2^-53
//   bounded int    : 128-bit multiply-shift
//   normal         : Box-Muller, cosine branch
//   shuffle        : Fisher-Yates from the back
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_word() { return gen_(); }

  // Uniform in [0,1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_word() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0,n), n > 0.
  int uniform_int(int n) {
    return static_cast<int>(
        (static_cast<unsigned __int128>(next_word()) *
         static_cast<unsigned __int128>(n)) >> 64);
  }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)],
                v[static_cast<size_t>(uniform_int(i + 1))]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

// Splitmix64 finalizer over (seed, stream) so one run seed can feed several
// independent deterministic streams (split, init, shuffle, ...).
inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace ehrgmtl
