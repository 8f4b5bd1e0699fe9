#pragma once

#include <cstdint>

namespace limex {

/// splitmix64 finalizer. Bijective on 64-bit words, full avalanche.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based word: a pure function of (seed, a, b), so any consumer can
/// evaluate entries in any order (or in parallel) and get identical streams.
constexpr std::uint64_t counter_word(std::uint64_t seed, std::uint64_t a,
                                     std::uint64_t b) {
  return mix64(mix64(mix64(seed) ^ a) ^ b);
}

/// Fair coin flip for entry (i, j) of a mask matrix.
constexpr bool coin_flip(std::uint64_t seed, std::uint64_t i, std::uint64_t j) {
  return (counter_word(seed, i, j) >> 63) != 0;
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b) {
  return static_cast<double>(counter_word(seed, a, b) >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) via the multiply-shift map.
constexpr std::uint64_t counter_below(std::uint64_t seed, std::uint64_t a,
                                      std::uint64_t b, std::uint64_t bound) {
  using u128 = unsigned __int128;
  return static_cast<std::uint64_t>(
      (static_cast<u128>(counter_word(seed, a, b)) * bound) >> 64);
}

}  // namespace limex
