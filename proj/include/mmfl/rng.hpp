#ifndef MMFL_RNG_HPP
#define MMFL_RNG_HPP

#include <cstdint>

namespace mmfl {

/// SplitMix64 finalizer; a bijection on 64-bit words with good avalanche.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of trial `trial` under `master`. Depends only on the pair, so trials
/// can be generated in any order or in parallel.
constexpr std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
  return splitmix64(splitmix64(master) ^ (0xD1B54A32D192ED03ULL * (trial + 1)));
}

}  // namespace mmfl

#endif  // MMFL_RNG_HPP
