#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mwc {

// SplitMix64 finalizer. Used to derive independent substream seeds so that
// parallel work is reproducible regardless of scheduling.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the substream identified by `keys` under `base`.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = splitmix64(base);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  return Rng{derive_seed(base, keys)};
}

// Stable stream labels; values are part of the reproducibility contract.
namespace stream {
inline constexpr std::uint64_t network = 1;
inline constexpr std::uint64_t profiles = 2;
inline constexpr std::uint64_t cascade = 3;
inline constexpr std::uint64_t attack = 4;
inline constexpr std::uint64_t property = 5;
inline constexpr std::uint64_t bench = 6;
}  // namespace stream

}  // namespace mwc
