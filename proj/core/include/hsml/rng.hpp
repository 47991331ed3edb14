// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Portable random numbers.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard distributions are not portable across library
// implementations, so every transform to doubles or integers is defined here:
//
//   uniform()      = (next >> 11) * 2^-53, in [0, 1)
//   uniform(a, b)  = a + (b - a) * uniform()
//   below(n)       = next % n after rejecting the biased top range
//   normal()       = Box-Muller, one draw per pair of uniforms (no cached spare)
//
// Independent streams are derived from one user seed with derive_seed(), a
// splitmix64 mix of (seed, stream id).

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace hsml {

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi);
  std::size_t below(std::size_t n);
  double normal(double mean = 0.0, double stddev = 1.0);
  /// Normal draw resampled until it falls within two standard deviations.
  double truncated_normal(double stddev);
  /// Uniform random permutation of 0..n-1 (Fisher-Yates).
  std::vector<std::size_t> permutation(std::size_t n);

  std::string state() const;
  void set_state(const std::string& text);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hsml
