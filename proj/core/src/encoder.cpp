// SPDX-License-Identifier: Apache-2.0
#include "centerscan/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "centerscan/nn.hpp"
#include "centerscan/ops.hpp"

namespace centerscan {

void EncoderConfig::validate() const {
  if (in_channels == 0 || embed_dim == 0) throw std::invalid_argument("EncoderConfig: channel widths must be > 0");
  if (num_stages == 0) throw std::invalid_argument("EncoderConfig: num_stages must be >= 1");
  if (blocks_per_stage == 0) throw std::invalid_argument("EncoderConfig: blocks_per_stage must be >= 1");
  if (block.region_size < 1 || block.region_size > 3) {
    throw std::invalid_argument("EncoderConfig: region_size must be 1, 2 or 3");
  }
}

Encoder::Encoder(const EncoderConfig& config, ParameterSet& reg, Rng& rng, const std::string& prefix)
    : config_(config) {
  config_.validate();
  const std::size_t C = config_.embed_dim, a = config_.adapter_dim;
  const std::size_t before_frozen = reg.frozen_count(), before_trainable = reg.trainable_count();

  auto make_block = [&](const std::string& name, std::size_t in, std::size_t stride, bool adapter) {
    Block b;
    b.stride = stride;
    const double sd = std::sqrt(2.0 / static_cast<double>(in * 9));
    b.conv_w = reg.add(name + "conv.weight", randn({C, in, 3, 3}, rng, sd), true);
    b.conv_b = reg.add(name + "conv.bias", randn({C}, rng, 0.1), true);
    b.norm_gain = reg.add(name + "norm.gain", Tensor::full({C}, 1.0), true);
    b.norm_bias = reg.add(name + "norm.bias", Tensor::zeros({C}), true);
    if (adapter && a > 0) {
      b.has_adapter = true;
      const std::string ap = name + "adapter.";
      b.adapter.down_w = reg.add(ap + "down.weight", randn({C, a}, rng, 1.0 / std::sqrt(double(C))), false);
      b.adapter.down_b = reg.add(ap + "down.bias", Tensor::zeros({a}), false);
      b.adapter.block = CenterBlock::create(reg, ap + "block.", a, config_.block, rng, false);
      b.adapter.up_w = reg.add(ap + "up.weight", Tensor::zeros({a, C}), false);
      b.adapter.up_b = reg.add(ap + "up.bias", Tensor::zeros({C}), false);
    }
    return b;
  };

  stem_ = make_block(prefix + "stem.", config_.in_channels, 1, false);
  for (std::size_t s = 0; s < config_.num_stages; ++s) {
    std::vector<Block> blocks;
    for (std::size_t k = 0; k < config_.blocks_per_stage; ++k) {
      const std::string name = prefix + "stage" + std::to_string(s + 1) + ".block" + std::to_string(k) + ".";
      blocks.push_back(make_block(name, C, k == 0 ? 2 : 1, true));
    }
    stages_.push_back(std::move(blocks));
  }
  census_.frozen_count = reg.frozen_count() - before_frozen;
  census_.trainable_count = reg.trainable_count() - before_trainable;
}

Tensor Encoder::backbone_block(const Tensor& x, const Block& b) const {
  Tensor y = nn::conv(x, b.conv_w, b.conv_b, b.stride, 1);
  return ops::silu(nn::channel_norm(y, b.norm_gain, b.norm_bias));
}

Tensor Encoder::apply_adapter(const Tensor& x, const Adapter& a) const {
  const std::size_t N = x.dim(0), H = x.dim(2), W = x.dim(3);
  Tensor tokens = nn::to_tokens(x);
  Tensor down = nn::from_tokens(nn::linear(tokens, a.down_w, a.down_b), N, H, W);
  Tensor mixed = a.block.forward(down);
  Tensor up = nn::linear(nn::to_tokens(mixed), a.up_w, a.up_b);
  return nn::from_tokens(ops::add(tokens, up), N, H, W);
}

EncoderOutput Encoder::encode(const Tensor& image, const AblationConfig& ablation) const {
  if (image.rank() != 4 || image.dim(1) != config_.in_channels) {
    throw ShapeError("encode: expected (N, " + std::to_string(config_.in_channels) + ", H, W), got " +
                     shape_str(image.shape()));
  }
  const std::size_t min_extent = std::size_t{1} << config_.num_stages;
  if (image.dim(2) < min_extent || image.dim(3) < min_extent) {
    throw ShapeError("encode: image " + shape_str(image.shape()) + " smaller than " + std::to_string(min_extent) +
                     " required by " + std::to_string(config_.num_stages) + " stages");
  }
  EncoderOutput out;
  out.stem = backbone_block(image, stem_);
  Tensor x = out.stem;
  for (const auto& blocks : stages_) {
    for (const auto& b : blocks) {
      x = backbone_block(x, b);
      if (ablation.A && b.has_adapter) x = apply_adapter(x, b.adapter);
    }
    out.stages.push_back(x);
  }
  out.context = nn::to_tokens(x);
  return out;
}

std::vector<const CenterBlock*> Encoder::adapter_blocks() const {
  std::vector<const CenterBlock*> out;
  for (const auto& blocks : stages_) {
    for (const auto& b : blocks) {
      if (b.has_adapter) out.push_back(&b.adapter.block);
    }
  }
  return out;
}

ParameterCensus parameter_census(const EncoderConfig& config) {
  ParameterSet scratch;
  Rng rng(0);
  return Encoder(config, scratch, rng).census();
}

}  // namespace centerscan
