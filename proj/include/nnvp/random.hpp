#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nnvp {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for a position in a tree of random streams, e.g.
// derive_seed(root, {repeat, example, candidate}). Distinct paths give
// statistically independent streams; the same path always gives the same seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream salts, so that e.g. the validation split and restart #0 never share a seed.
namespace salt {
inline constexpr std::uint64_t kValidationSplit = 0x5641'4c49'4400ULL;
inline constexpr std::uint64_t kRestart = 0x5245'5354'0000ULL;
inline constexpr std::uint64_t kOnlineOrder = 0x4f4e'4c49'4e45ULL;
inline constexpr std::uint64_t kSplit = 0x5350'4c49'5400ULL;
inline constexpr std::uint64_t kVenn = 0x5645'4e4e'0000ULL;
inline constexpr std::uint64_t kBaseline = 0x4241'5345'0000ULL;
}  // namespace salt

}  // namespace nnvp
