#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cambnn {

// Draws with explicit algorithms so streams are identical across platforms
// and standard libraries (std::uniform_*_distribution is not pinned).

// Unbiased integer in [0, n), rejection sampled. n must be positive.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t reject_below = (-n) % n;  // 2^64 mod n
  std::uint64_t r;
  do {
    r = rng();
  } while (r < reject_below);
  return r % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Standard normal via Box-Muller on pinned uniforms.
inline double normal_unit(std::mt19937_64& rng) {
  double u1;
  do {
    u1 = uniform_unit(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform_unit(rng);
  const double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

// In-place Fisher-Yates with the pinned index draw.
template <typename T>
void shuffle_pinned(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace cambnn
