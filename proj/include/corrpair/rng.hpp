#pragma once

#include <cstdint>
#include <random>

namespace corrpair {

using Rng = std::mt19937_64;

// Independent stream for (master, index, sub). Streams depend only on these
// three numbers, so samples can be generated in any order or thread.
Rng child_stream(std::uint64_t master, std::uint64_t index, std::uint64_t sub = 0);

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  return nd(rng);
}

inline double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  return ud(rng);
}

// FNV-1a 64-bit.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace corrpair
