// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "centerscan/ablation_config.hpp"
#include "centerscan/encoder.hpp"
#include "centerscan/losses.hpp"
#include "centerscan/memory_decoder.hpp"
#include "centerscan/parameters.hpp"
#include "centerscan/sps.hpp"
#include "centerscan/synthetic.hpp"

namespace centerscan {

struct ModelConfig {
  EncoderConfig encoder;
  SpsConfig sps;
  DecoderConfig decoder;
  LossConfig loss;
  AblationConfig ablation;

  /// Propagates the encoder width into SPS and decoder and checks levels.
  void sync();
};

/// Per-volume recurrent state: SPS prototypes and per-level decoder memories.
struct VolumeState {
  PrototypeMemory sps;
  ContextMemoryBank decoder;
  void reset();
};

/// Encoder -> SPS -> memory decoder, run one slice at a time so each slice
/// sees only memory written by earlier slices of the same volume.
///
/// Every component's parameters are created regardless of the ablation, from
/// forks of one seed, so configurations sharing a seed share the frozen
/// backbone and every common initial weight.
class SegmentationModel {
 public:
  SegmentationModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  const Encoder& encoder() const { return encoder_; }

  VolumeState new_volume_state() const;
  /// Logits P^1..P^L for one (1, in_channels, H, W) slice.
  std::vector<Tensor> forward_slice(const Tensor& image, VolumeState& state, int slice_index) const;
  /// Loss weights in effect: without the memory decoder only P^1 is supervised.
  LossConfig effective_loss() const;
  LossBreakdown slice_loss(const std::vector<Tensor>& preds, const LabelMap& gt) const;

  /// Argmax of the finest prediction.
  static LabelMap predict(const Tensor& finest_logits);
  /// Whole volume in slice order with a fresh state; optionally hands back the final state.
  std::vector<LabelMap> predict_volume(const SyntheticVolume& volume, VolumeState* final_state = nullptr) const;

 private:
  ModelConfig config_;
  ParameterSet params_;
  Encoder encoder_;
  SpsParams sps_;
  MemoryDecoder decoder_;
};

}  // namespace centerscan
