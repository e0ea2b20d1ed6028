#pragma once

#include <cstdint>

namespace tracejudge {

/// Serial is the reference path; Parallel must produce bitwise-identical results.
enum class Exec { Serial, Parallel };

/// Independent stream seed for work item `index`; splitmix64 finalizer over the pair.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace tracejudge
