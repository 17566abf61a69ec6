#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedsec {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a tag path, so
// that e.g. the probe of client 17 in cycle 0 gets the same seed no matter
// which policy asked for it first.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(base);
  for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632BE59BD9B4E019ULL));
  return h;
}

// Stream tags used with derive_seed.
namespace seed_tag {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kPartition = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kArrival = 4;
inline constexpr std::uint64_t kProbe = 5;
inline constexpr std::uint64_t kRandomPolicy = 6;
inline constexpr std::uint64_t kTrain = 7;
inline constexpr std::uint64_t kSplit = 8;
inline constexpr std::uint64_t kEpoch = 9;
inline constexpr std::uint64_t kRound = 10;
}  // namespace seed_tag

}  // namespace fedsec
