#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gnninject {

using Rng = std::mt19937_64;

// The distributions below are written out instead of using <random>'s
// distribution classes, whose output is implementation-defined. Seeded runs
// must produce identical files on every standard library.

/// Uniform integer in [0, n). n must be positive.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

/// Uniform double in the open interval (0, 1).
double uniform_open01(Rng& rng);

double standard_normal(Rng& rng);

/// Standard Gumbel sample, -ln(-ln U).
double standard_gumbel(Rng& rng);

/// Independent stream derived from a master seed and a stream name.
Rng derive_rng(std::uint64_t master_seed, std::string_view stream);

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t fnv1a64(std::string_view bytes);

template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(rng, i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace gnninject
