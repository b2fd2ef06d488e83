#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace figsbd {

/// SplitMix64. Every random draw in the project goes through this generator so
/// synthetic data, fold splits and random rankings are reproducible from a
/// seed in any language:
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
///
/// Derived draws:
///   uniform()        (next() >> 11) * 2^-53, in [0, 1)
///   uniform_int(b)   rejection: discard r < (2^64 - b) mod b, return r mod b
///   normal()         Box-Muller cosine branch, u1 = 1 - uniform(), u2 = uniform();
///                    one normal per two draws, nothing cached
///   permutation(n)   identity, then Fisher-Yates for i = n-1 .. 1 with
///                    j = uniform_int(i + 1)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  double uniform();
  std::uint64_t uniform_int(std::uint64_t bound);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t state_;
};

/// Combines a base seed with stream identifiers into an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace figsbd
