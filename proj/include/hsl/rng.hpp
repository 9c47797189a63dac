#pragma once

#include <cstdint>
#include <random>

namespace hsl {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of replica `k` under `root`: the low word of a two-round splitmix
/// hash of (root, k). Distinct k give distinct streams for a fixed root.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t k) {
  const std::uint64_t hk = splitmix64(k ^ 0xD1B54A32D192ED03ULL);
  const std::uint64_t hi = splitmix64(root ^ hk);
  return splitmix64(hi + hk);
}

/// Engine whose full state is expanded from a 64-bit seed through seed_seq.
inline Engine make_engine(std::uint64_t seed) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Engine(seq);
}

}  // namespace hsl
