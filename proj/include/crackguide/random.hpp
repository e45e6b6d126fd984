#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace crackguide {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and a path of stream tags.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(master);
  for (auto t : tags) s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags, kept distinct so enabling one consumer never shifts another.
namespace stream {
inline constexpr std::uint64_t kScene = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kTrainSplit = 3;
inline constexpr std::uint64_t kTestSplit = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kShuffle = 6;
inline constexpr std::uint64_t kSubsample = 7;
inline constexpr std::uint64_t kDemo = 8;
}  // namespace stream

}  // namespace crackguide
