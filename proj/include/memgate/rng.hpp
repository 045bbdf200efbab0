#pragma once

#include <cstdint>
#include <string_view>

namespace memgate {

/// Portable 64-bit-state generator (SplitMix64). Output depends only on the
/// seed, so streams reproduce across compilers and platforms, unlike the
/// distributions in <random>.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Derives an independent generator for a named purpose ("shuffle",
  /// "draws", ...). Same (seed, name) always yields the same sub-stream.
  static SplitMix64 substream(std::uint64_t seed, std::string_view name);

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// FNV-1a over bytes, finalized with the SplitMix64 mixer and keyed by seed.
std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed = 0);

}  // namespace memgate
