#include "corrpair/rng.hpp"

#include <array>

namespace corrpair {

Rng child_stream(std::uint64_t master, std::uint64_t index, std::uint64_t sub) {
  std::array<std::uint32_t, 7> words{
      static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
      static_cast<std::uint32_t>(index),  static_cast<std::uint32_t>(index >> 32),
      static_cast<std::uint32_t>(sub),    static_cast<std::uint32_t>(sub >> 32),
      0x5eedu};
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace corrpair
