#pragma once

#include <cstdint>
#include <random>

namespace ensopt {

// splitmix64 finalizer, used to turn (seed, key...) tuples into
// statistically independent engine seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ b);
}

template <typename... Rest>
std::uint64_t mix64(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return mix64(mix64(a, b), static_cast<std::uint64_t>(rest)...);
}

// Substream engine keyed by an arbitrary tuple of integers. Streams with
// different keys are independent for all practical purposes.
template <typename... Keys>
std::mt19937_64 substream(std::uint64_t seed, Keys... keys) {
  if constexpr (sizeof...(keys) == 0) {
    return std::mt19937_64(mix64(seed));
  } else {
    return std::mt19937_64(mix64(seed, static_cast<std::uint64_t>(keys)...));
  }
}

}  // namespace ensopt
