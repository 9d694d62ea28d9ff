#pragma once

#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace orient {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a key path, so a
/// draw depends only on what it is for, never on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632BE59BD9B4E019ULL));
  return h;
}

inline Rng make_stream(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(base, keys));
}

// Stream purpose tags.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kMining = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kBatch = 4;
inline constexpr std::uint64_t kShape = 5;
inline constexpr std::uint64_t kStyle = 6;
inline constexpr std::uint64_t kAugment = 7;
inline constexpr std::uint64_t kRefresh = 8;
}  // namespace stream

/// Uniform draw in [-pi, pi).
inline double uniform_angle(Rng& rng) {
  std::uniform_real_distribution<double> dist(-std::numbers::pi, std::numbers::pi);
  return dist(rng);
}

}  // namespace orient
