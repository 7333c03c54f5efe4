// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace mlm {

// SplitMix64 finalizer (Steele, Lea, Flood 2014): constants 0x9E3779B97F4A7C15,
// 0xBF58476D1CE4E5B9, 0x94D049BB133111EB with shifts 30, 27, 31.
uint64_t splitmix64(uint64_t& state);

// Hashes a tuple of integers into one 64-bit key. Used to derive independent
// streams from (seed, epoch, index, ...) without sharing generator state.
uint64_t mix_key(std::initializer_list<uint64_t> parts);

// xoshiro256** 1.0 (Blackman, Vigna). State is filled from a SplitMix64
// sequence started at the seed. next_u64, uniform and below use integer and
// exactly-rounded arithmetic only, so they agree on every platform; normal()
// additionally goes through libm log/cos.
class Rng {
 public:
  explicit Rng(uint64_t seed);
  static Rng for_key(std::initializer_list<uint64_t> parts) { return Rng(mix_key(parts)); }

  uint64_t next_u64();

  // Uniform double in [0, 1) built from the top 53 bits.
  double uniform();

  // Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
  uint64_t below(uint64_t bound);

  // Standard normal via Box-Muller; the second variate is discarded so each
  // call consumes exactly two uniforms.
  double normal();

  // Normal(0, stddev^2) resampled until it falls inside +-2 stddev.
  double truncated_normal(double stddev);

 private:
  std::array<uint64_t, 4> s_{};
};

}  // namespace mlm
