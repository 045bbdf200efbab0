#include "memgate/rng.hpp"

namespace memgate {

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  // Reject the top sliver so every residue is equally likely.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % bound;
}

SplitMix64 SplitMix64::substream(std::uint64_t seed, std::string_view name) {
  return SplitMix64(mix(seed) ^ hash_bytes(name, 0x5ca1ab1eULL));
}

std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ SplitMix64::mix(seed);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return SplitMix64::mix(h);
}

}  // namespace memgate
