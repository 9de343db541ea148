#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Seeded randomness helpers. Standard-library distributions are
// implementation-defined, so every draw here is built from raw mt19937_64
// output to keep identical seeds producing identical streams.

namespace sme::rng {

using Engine = std::mt19937_64;

// Uniform double in [0, 1) from the top 53 bits.
inline double u01(Engine& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; draws two uniforms per call.
inline double gaussian(Engine& g) {
  double u1 = u01(g);
  while (u1 <= 0.0) u1 = u01(g);
  const double u2 = u01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// Uniform integer in [0, n).
inline std::uint64_t below(Engine& g, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = g();
  while (x >= limit) x = g();
  return x % n;
}

template <typename T>
void shuffle(std::vector<T>& v, Engine& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[below(g, i)]);
  }
}

// splitmix64 finalizer; used to derive independent per-fold seeds.
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix(master ^ mix(stream + 1));
}

}  // namespace sme::rng
