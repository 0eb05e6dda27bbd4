// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "centerscan/ablation_config.hpp"
#include "centerscan/parameters.hpp"
#include "centerscan/rng.hpp"
#include "centerscan/sps.hpp"
#include "centerscan/tensor.hpp"

namespace centerscan {

struct DecoderConfig {
  std::size_t channels = 16;
  std::size_t num_classes = 2;
  std::size_t levels = 4;
  std::size_t memory_capacity = 32;
  double tau = 0.0;  // <= 0 selects sqrt(channels)

  double temperature() const;
};

/// One context memory per decoder level, reset with each volume.
class ContextMemoryBank {
 public:
  ContextMemoryBank(std::size_t levels, std::size_t capacity, std::size_t width);
  PrototypeMemory& level(std::size_t j) { return levels_.at(j); }
  const PrototypeMemory& level(std::size_t j) const { return levels_.at(j); }
  std::size_t size() const { return levels_.size(); }
  void reset_volume();

 private:
  std::vector<PrototypeMemory> levels_;
};

/// Coarse-to-fine transposed-conv cascade with skip concatenation, optional
/// per-level context-memory attention and a prediction head per level.
class MemoryDecoder {
 public:
  MemoryDecoder(const DecoderConfig& config, ParameterSet& registry, Rng& rng, const std::string& prefix = "decoder.");

  /// bottom: coarsest features (1, C, h, w). skips: finest first, one per
  /// level, each twice the extent of the next (up to cropping).
  /// Returns logits P^1..P^L with P^1 at the finest level.
  /// `memory` may be null only when ablation.C is off.
  std::vector<Tensor> decode(const Tensor& bottom, const std::vector<Tensor>& skips, const AblationConfig& ablation,
                             ContextMemoryBank* memory, int slice_index) const;

  const DecoderConfig& config() const { return config_; }

 private:
  struct Level {
    Tensor up_w, up_b;       // (C, C, 2, 2), (C)
    Tensor fuse_w, fuse_b;   // (C, 2C, 3, 3), (C)
    Tensor mem_key, mem_value;  // (C, C)
    Tensor head_w, head_b;   // (K, C, 1, 1), (K)
  };
  DecoderConfig config_;
  std::vector<Level> levels_;  // index 0 = finest
};

}  // namespace centerscan
