#pragma once

#include <cstdint>
#include <random>

namespace ecodrive {

/**
 * Seeded generator that can derive independent child streams.
 *
 * Children are seeded through a SplitMix64 mix of (seed, stream id), so a
 * run's randomness depends only on its recorded seed and stream index.
 */
class Rng
{
public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }

  Rng split(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x9E3779B97F4A7C15ULL))); }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

  std::uint64_t next() { return engine_(); }

  std::mt19937_64 & engine() { return engine_; }

  static std::uint64_t mix(std::uint64_t z)
  {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace ecodrive
