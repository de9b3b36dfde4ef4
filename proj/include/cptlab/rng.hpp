#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>

#include "cptlab/common.hpp"

namespace cptlab {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Combines a root seed with structural coordinates (task index, step, slot,
/// rollout, ...) into an independent stream seed. Every random decision in
/// the library derives its stream this way, which is what makes results
/// independent of worker count.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t w : words) h = detail::splitmix64(h ^ w);
  return h;
}

/// Stream purposes mixed into derived seeds so distinct uses never collide.
enum SeedTag : std::uint64_t {
  kSeedStream = 0x5354524DULL,
  kSeedEmbed = 0x454D4244ULL,
  kSeedContext = 0x43545854ULL,
  kSeedMapping = 0x4D415050ULL,
  kSeedBuckets = 0x42434B54ULL,
  kSeedInit = 0x494E4954ULL,
  kSeedTask = 0x5441534BULL,
  kSeedBatch = 0x42415443ULL,
  kSeedRollout = 0x524F4C4CULL,
  kSeedFilter = 0x46494C54ULL,
  kSeedKl = 0x4B4C4456ULL,
  kSeedPretrain = 0x50524554ULL,
  kSeedMtl = 0x4D544C30ULL,
};

/// Small deterministic RNG (SplitMix64 core). Identical across platforms and
/// standard-library implementations, unlike <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw InvalidInput("uniform_int: n must be positive");
    return static_cast<int>(
        (static_cast<unsigned __int128>(next_u64()) *
         static_cast<unsigned __int128>(n)) >> 64);
  }

  /// Standard normal via Box-Muller (two fresh uniforms per call).
  double normal() {
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Index draw from an explicit probability vector (inverse CDF).
  int categorical(std::span<const double> probs) {
    if (probs.empty()) throw InvalidInput("categorical: empty distribution");
    double u = uniform01();
    double c = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      c += probs[i];
      if (u < c) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size() - 1);
  }

 private:
  std::uint64_t state_;
};

}  // namespace cptlab
