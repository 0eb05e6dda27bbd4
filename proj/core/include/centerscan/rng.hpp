// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "centerscan/tensor.hpp"

namespace centerscan {

/// Seeded generator. Every source of randomness in a run derives from one
/// master seed through fork(), so streams stay independent of call order
/// across subsystems.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mean, sd)(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  std::mt19937_64& engine() { return engine_; }

  /// Child stream keyed by a label; depends only on (seed, tag).
  Rng fork(std::string_view tag) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

Tensor randn(Shape shape, Rng& rng, double sd, bool requires_grad = false);
Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);

}  // namespace centerscan
