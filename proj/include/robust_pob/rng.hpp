// Deterministic random streams. Each (seed, stream) pair gets its own engine,
// so scenario i draws the same numbers no matter how work is split across
// threads. Uniform and normal draws are spelled out here instead of using
// std::*_distribution, whose output is not pinned down by the standard; with
// a fixed seed the sampled values are identical across library builds.
#pragma once

#include "robust_pob/common.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace robust_pob {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct RandomStream {
  std::mt19937_64 eng;

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t s = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    const std::uint64_t a = splitmix64(s);
    const std::uint64_t b = splitmix64(s);
    eng.seed(a ^ (b << 1));
  }

  // 53-bit uniform in [0, 1).
  double uniform01() { return static_cast<double>(eng() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller with a cached spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  Vec gaussian_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

 private:
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace robust_pob
