#pragma once
// Portable seeded draws. std::mt19937_64's output sequence is fixed by the
// standard; the distributions in <random> are not, so they are avoided.

#include <cstdint>
#include <limits>
#include <random>

namespace clens::detail {

inline std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = kMax - (kMax % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

/// Uniform in [0, 1) with 53 random bits.
inline double draw_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace clens::detail
