#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace sphereopt {

// SplitMix64 mixing step. Used for seed expansion and for deriving child
// seeds in sweeps (documented in the README; all stochasticity in the
// project flows from explicit 64-bit seeds through this mixer).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// One-shot finalizer form, for hashing values into a seed.
inline std::uint64_t splitmix64_mix(std::uint64_t x) {
  return splitmix64(x);
}

// xoshiro256++ seeded via SplitMix64. Small, fast, and bit-reproducible;
// we avoid std::normal_distribution on purpose since its output is not
// pinned by the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller (cosine branch; two uniforms per draw).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Standard normal rejected outside [-cut, cut].
  double truncated_normal(double cut) {
    for (;;) {
      double z = normal();
      if (std::abs(z) <= cut) return z;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

// Child seed for grid point (i0, i1, ...): hash the base seed with each
// axis index in order.
inline std::uint64_t derive_seed(std::uint64_t base, const std::vector<std::uint64_t>& words) {
  std::uint64_t h = splitmix64_mix(base);
  for (std::uint64_t w : words) h = splitmix64_mix(h ^ w);
  return h;
}

}  // namespace sphereopt
