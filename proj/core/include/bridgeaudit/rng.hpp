#pragma once

#include <cstdint>
#include <random>

namespace bridgeaudit {

/// Uniform draw in [0, n) straight from mt19937_64 output. The standard
/// distributions are implementation-defined, which would make traces
/// differ between standard libraries.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

/// Uniform draw in [lo, hi].
inline std::uint64_t uniform_between(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
  return lo + uniform_below(rng, hi - lo + 1);
}

/// True with probability num/den.
inline bool chance(std::mt19937_64& rng, std::uint64_t num, std::uint64_t den) {
  return uniform_below(rng, den) < num;
}

}  // namespace bridgeaudit
