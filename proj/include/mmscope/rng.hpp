#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mmscope::rng {

// std::mt19937_64 output is fully specified by the standard, but the
// standard *distributions* are not; every transform below is explicit so
// that identical seeds give identical streams on any toolchain.

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent substream k of a base seed.
inline Engine substream(std::uint64_t seed, std::uint64_t k) {
  return Engine(splitmix64(seed ^ splitmix64(k + 1)));
}

// Uniform double in [0, 1).
inline double u01(Engine& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Uniform double in (0, 1].
inline double u01_open_low(Engine& g) {
  return 1.0 - u01(g);
}

inline double uniform(Engine& g, double lo, double hi) {
  return lo + (hi - lo) * u01(g);
}

// Uniform integer in [0, n). Multiply-shift map of the raw 64-bit draw.
inline std::uint64_t below(Engine& g, std::uint64_t n) {
  const unsigned __int128 wide = static_cast<unsigned __int128>(g()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

// Standard normal via Box-Muller, one draw per call.
inline double normal(Engine& g) {
  const double u1 = u01_open_low(g);
  const double u2 = u01(g);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Fisher-Yates shuffle.
template <typename T>
void shuffle(Engine& g, std::vector<T>& xs) {
  for (std::size_t i = xs.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(below(g, i));
    std::swap(xs[i - 1], xs[j]);
  }
}

}  // namespace mmscope::rng
