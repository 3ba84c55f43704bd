// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic random streams. std::mt19937_64 is bit-exactly specified by
// the standard, while the std:: distributions are not, so the conversions to
// uniform reals and bounded integers are done here by hand.

#include <cmath>
#include <cstdint>
#include <random>

namespace spitfilter {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of the independent stream number `index` under `master`.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t index) {
  return Rng{stream_seed(master, index)};
}

/// Uniform on (0, 1], 53 bits of resolution.
inline double uniform_open_closed(Rng& rng) noexcept {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

/// Uniform integer in [0, n), unbiased (rejection). n must be > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) noexcept {
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

/// Inverse-CDF exponential draw, x = -ln(U) / rate.
inline double exponential_from_uniform(double u, double rate) noexcept {
  return -std::log(u) / rate;
}

inline double draw_exponential(Rng& rng, double rate) noexcept {
  return exponential_from_uniform(uniform_open_closed(rng), rate);
}

}  // namespace spitfilter
