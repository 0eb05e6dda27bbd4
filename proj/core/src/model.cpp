// SPDX-License-Identifier: Apache-2.0
#include "centerscan/model.hpp"

#include <stdexcept>

#include "centerscan/ops.hpp"

namespace centerscan {

void ModelConfig::sync() {
  sps.width = encoder.embed_dim;
  decoder.channels = encoder.embed_dim;
  decoder.levels = encoder.num_stages;
  if (loss.level_weights.size() != decoder.levels) loss.level_weights.assign(decoder.levels, 1.0);
}

void VolumeState::reset() {
  sps.reset_volume();
  decoder.reset_volume();
}

namespace {

ModelConfig synced(ModelConfig c) {
  c.sync();
  return c;
}

Rng fork_of(std::uint64_t seed, const char* tag) { return Rng(seed).fork(tag); }

}  // namespace

SegmentationModel::SegmentationModel(ModelConfig config, std::uint64_t seed)
    : config_(synced(std::move(config))),
      encoder_([&]() -> Encoder {
        Rng r = fork_of(seed, "encoder");
        return Encoder(config_.encoder, params_, r);
      }()),
      sps_([&] {
        Rng r = fork_of(seed, "sps");
        return SpsParams::create(params_, "sps.", config_.sps, r);
      }()),
      decoder_([&] {
        Rng r = fork_of(seed, "decoder");
        return MemoryDecoder(config_.decoder, params_, r);
      }()) {}

VolumeState SegmentationModel::new_volume_state() const {
  return VolumeState{PrototypeMemory(config_.sps.memory_capacity, config_.sps.width),
                     ContextMemoryBank(config_.decoder.levels, config_.decoder.memory_capacity,
                                       config_.decoder.channels)};
}

std::vector<Tensor> SegmentationModel::forward_slice(const Tensor& image, VolumeState& state, int slice_index) const {
  if (image.rank() != 4 || image.dim(0) != 1) {
    throw ShapeError("forward_slice: expected a single slice (1, C, H, W), got " + shape_str(image.shape()));
  }
  const auto& ab = config_.ablation;
  EncoderOutput enc = encoder_.encode(image, ab);
  Tensor bottom = enc.stages.back();
  if (ab.B) bottom = sps_forward(bottom, enc.context, sps_, config_.sps, state.sps, slice_index).P_out;
  std::vector<Tensor> skips{enc.stem};
  for (std::size_t s = 0; s + 1 < enc.stages.size(); ++s) skips.push_back(enc.stages[s]);
  return decoder_.decode(bottom, skips, ab, &state.decoder, slice_index);
}

LossConfig SegmentationModel::effective_loss() const {
  LossConfig cfg = config_.loss;
  if (!config_.ablation.C) {
    for (std::size_t j = 1; j < cfg.level_weights.size(); ++j) cfg.level_weights[j] = 0.0;
  }
  return cfg;
}

LossBreakdown SegmentationModel::slice_loss(const std::vector<Tensor>& preds, const LabelMap& gt) const {
  return hierarchical_loss(preds, gt, effective_loss());
}

LabelMap SegmentationModel::predict(const Tensor& logits) {
  if (logits.rank() != 4 || logits.dim(0) != 1) throw ShapeError("predict: expected (1, K, H, W)");
  const std::size_t K = logits.dim(1), H = logits.dim(2), W = logits.dim(3), HW = H * W;
  LabelMap out{H, W, std::vector<std::uint8_t>(HW, 0)};
  auto d = logits.data();
  for (std::size_t i = 0; i < HW; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < K; ++c) {
      if (d[c * HW + i] > d[best * HW + i]) best = c;
    }
    out.labels[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

std::vector<LabelMap> SegmentationModel::predict_volume(const SyntheticVolume& volume, VolumeState* final_state) const {
  NoGradGuard no_grad;
  VolumeState state = new_volume_state();
  std::vector<LabelMap> out;
  for (std::size_t s = 0; s < volume.slices(); ++s) {
    auto preds = forward_slice(volume.slice_tensor(s), state, static_cast<int>(s));
    out.push_back(predict(preds.front()));
  }
  if (final_state) *final_state = std::move(state);
  return out;
}

}  // namespace centerscan
