// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace camforge {

using Rng = std::mt19937_64;

/// Stream purposes mixed into derived seeds so that independent consumers of
/// the same (generation, slot) never share a stream.
enum class Purpose : std::uint64_t {
  kInit = 1,
  kMutation = 2,
  kCrossover = 3,
  kNoise = 4,
  kFrames = 5,
  kPath = 6,
  kRansac = 7,
  kPretrain = 8,
  kScene = 9,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Hash a master seed together with an ordered list of stream coordinates.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t master, Purpose purpose,
                                    std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = derive_seed(master, {static_cast<std::uint64_t>(purpose)});
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return h;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace camforge
