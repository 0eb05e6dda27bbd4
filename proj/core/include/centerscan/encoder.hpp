// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "centerscan/ablation_config.hpp"
#include "centerscan/parameters.hpp"
#include "centerscan/rng.hpp"
#include "centerscan/ssm_scan.hpp"
#include "centerscan/tensor.hpp"

namespace centerscan {

struct EncoderConfig {
  std::size_t in_channels = 1;
  std::size_t embed_dim = 16;
  std::size_t num_stages = 4;
  std::size_t blocks_per_stage = 1;
  std::size_t adapter_dim = 4;  // 0 disables adapters entirely
  CenterBlockConfig block;      // scan settings of the adapter mixer

  void validate() const;
};

struct EncoderOutput {
  Tensor stem;                 // full resolution, (1, C, H, W)
  std::vector<Tensor> stages;  // F1..F_S, stage s at ceil(H / 2^s)
  Tensor context;              // deepest stage as tokens, (h*w, C)
};

struct ParameterCensus {
  std::size_t frozen_count = 0;
  std::size_t trainable_count = 0;
  double ratio() const {
    return frozen_count ? static_cast<double>(trainable_count) / static_cast<double>(frozen_count) : 0.0;
  }
};

/// Frozen conv backbone (stem + strided stages) with trainable bottleneck
/// adapters after every backbone block. Adapter up-projections start at zero,
/// so a fresh encoder is exactly the bare backbone.
class Encoder {
 public:
  Encoder(const EncoderConfig& config, ParameterSet& registry, Rng& rng, const std::string& prefix = "encoder.");

  /// image: (N, in_channels, H, W) with H, W >= 2^num_stages.
  EncoderOutput encode(const Tensor& image, const AblationConfig& ablation) const;
  const EncoderConfig& config() const { return config_; }
  /// Backbone and adapter element counts as registered.
  ParameterCensus census() const { return census_; }
  /// Mixer of every adapter, shallowest stage first.
  std::vector<const CenterBlock*> adapter_blocks() const;

 private:
  struct Adapter {
    Tensor down_w, down_b;  // (C, a), (a)
    CenterBlock block;
    Tensor up_w, up_b;      // (a, C), (C)
  };
  struct Block {
    std::size_t stride = 1;
    Tensor conv_w, conv_b, norm_gain, norm_bias;
    bool has_adapter = false;
    Adapter adapter;
  };

  Tensor backbone_block(const Tensor& x, const Block& b) const;
  Tensor apply_adapter(const Tensor& x, const Adapter& a) const;

  EncoderConfig config_;
  Block stem_;
  std::vector<std::vector<Block>> stages_;
  ParameterCensus census_;
};

/// Exact frozen/trainable element counts of an encoder built from config.
ParameterCensus parameter_census(const EncoderConfig& config);

}  // namespace centerscan
