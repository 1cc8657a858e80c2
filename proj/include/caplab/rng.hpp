// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace caplab {

/// Deterministic random source used throughout the library.
///
/// The engine is std::mt19937_64, whose output sequence is fully specified
/// by the C++ standard, so runs with equal seeds reproduce bit-identically
/// on any conforming platform. Integer draws use rejection sampling on the
/// raw 64-bit output instead of std::uniform_int_distribution, whose
/// mapping is implementation-defined.
///
/// One Rng instance must be confined to a single worker at a time; parallel
/// workers derive private instances from a master seed via derive().
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const noexcept { return seed_; }

  uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be >= 1.
  uint64_t uniform_below(uint64_t bound) {
    if (bound == 0) {
      throw std::invalid_argument("Rng::uniform_below: bound must be >= 1");
    }
    // Rejection from the top to remove modulo bias.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t value;
    do {
      value = engine_();
    } while (value >= limit);
    return value % bound;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Independent stream for worker `index`, derived from the master seed.
  Rng derive(uint64_t index) const {
    return Rng(splitmix64(seed_ ^ (0x9e3779b97f4a7c15ULL * (index + 1))));
  }

 private:
  static uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace caplab
