// SPDX-License-Identifier: Apache-2.0
#include "centerscan/memory_decoder.hpp"

#include <cmath>
#include <stdexcept>

#include "centerscan/nn.hpp"
#include "centerscan/ops.hpp"

namespace centerscan {

double DecoderConfig::temperature() const { return tau > 0.0 ? tau : std::sqrt(static_cast<double>(channels)); }

ContextMemoryBank::ContextMemoryBank(std::size_t levels, std::size_t capacity, std::size_t width) {
  for (std::size_t j = 0; j < levels; ++j) levels_.emplace_back(capacity, width);
}

void ContextMemoryBank::reset_volume() {
  for (auto& m : levels_) m.reset_volume();
}

MemoryDecoder::MemoryDecoder(const DecoderConfig& config, ParameterSet& reg, Rng& rng, const std::string& prefix)
    : config_(config) {
  const std::size_t C = config.channels, K = config.num_classes;
  if (C == 0 || K < 2 || config.levels == 0) throw std::invalid_argument("DecoderConfig: invalid widths");
  for (std::size_t j = 0; j < config.levels; ++j) {
    const std::string p = prefix + "level" + std::to_string(j + 1) + ".";
    Level l;
    l.up_w = reg.add(p + "up.weight", randn({C, C, 2, 2}, rng, std::sqrt(1.0 / double(C))), false);
    l.up_b = reg.add(p + "up.bias", Tensor::zeros({C}), false);
    l.fuse_w = reg.add(p + "fuse.weight", randn({C, 2 * C, 3, 3}, rng, std::sqrt(2.0 / double(2 * C * 9))), false);
    l.fuse_b = reg.add(p + "fuse.bias", Tensor::zeros({C}), false);
    l.mem_key = reg.add(p + "mem_key", randn({C, C}, rng, 1.0 / std::sqrt(double(C))), false);
    l.mem_value = reg.add(p + "mem_value", randn({C, C}, rng, 0.1 / std::sqrt(double(C))), false);
    l.head_w = reg.add(p + "head.weight", randn({K, C, 1, 1}, rng, 1.0 / std::sqrt(double(C))), false);
    l.head_b = reg.add(p + "head.bias", Tensor::zeros({K}), false);
    levels_.push_back(std::move(l));
  }
}

namespace {

// Foreground- and background-weighted mean features of one slice, weighted by
// the level's own (detached) class probabilities.
Tensor slice_prototypes(const Tensor& tokens, const Tensor& logits) {
  const std::size_t T = tokens.dim(0), C = tokens.dim(1), K = logits.dim(1);
  const Tensor prob_t = ops::softmax(logits.detach(), 1);
  auto probs = prob_t.data();
  auto x = tokens.data();
  std::vector<double> protos(2 * C, 0.0);
  double wf = 0.0, wb = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double fg = 0.0;
    for (std::size_t c = 1; c < K; ++c) fg += probs[c * T + t];
    const double bg = probs[t];
    wf += fg;
    wb += bg;
    for (std::size_t k = 0; k < C; ++k) {
      protos[k] += fg * x[t * C + k];
      protos[C + k] += bg * x[t * C + k];
    }
  }
  for (std::size_t k = 0; k < C; ++k) {
    protos[k] /= std::max(wf, 1e-12);
    protos[C + k] /= std::max(wb, 1e-12);
  }
  return Tensor::from({2, C}, std::move(protos));
}

}  // namespace

std::vector<Tensor> MemoryDecoder::decode(const Tensor& bottom, const std::vector<Tensor>& skips,
                                          const AblationConfig& ablation, ContextMemoryBank* memory,
                                          int slice_index) const {
  const std::size_t L = config_.levels, C = config_.channels;
  if (skips.size() != L) {
    throw std::invalid_argument("decode: missing skip features (" + std::to_string(skips.size()) + " of " +
                                std::to_string(L) + ")");
  }
  if (bottom.rank() != 4 || bottom.dim(0) != 1 || bottom.dim(1) != C) {
    throw ShapeError("decode: bottom features " + shape_str(bottom.shape()) + " are not (1, " + std::to_string(C) +
                     ", h, w)");
  }
  if (ablation.C && (!memory || memory->size() != L)) {
    throw std::invalid_argument("decode: memory decoder enabled without a matching context memory bank");
  }
  std::vector<Tensor> preds(L);
  Tensor x = bottom;
  for (std::size_t j = L; j-- > 0;) {
    const Level& lv = levels_[j];
    const Tensor& skip = skips[j];
    if (!skip.defined() || skip.rank() != 4 || skip.dim(1) != C) {
      throw std::invalid_argument("decode: missing or malformed skip at level " + std::to_string(j + 1));
    }
    const std::size_t H = skip.dim(2), W = skip.dim(3);
    Tensor up = ops::add_bias(ops::conv_transpose2d(x, lv.up_w, 2), lv.up_b, 1);
    if (up.dim(2) < H || up.dim(3) < W) {
      throw ShapeError("decode: upsampled " + shape_str(up.shape()) + " smaller than skip " + shape_str(skip.shape()));
    }
    up = nn::crop_hw(up, H, W);
    Tensor f = ops::silu(nn::conv(ops::concat({up, skip}, 1), lv.fuse_w, lv.fuse_b, 1, 1));
    Tensor tokens = nn::to_tokens(f);
    if (ablation.C) {
      PrototypeMemory& mem = memory->level(j);
      Tensor refined = tokens;
      if (!mem.empty()) {
        mem.check_causal(slice_index);
        Tensor stored = mem.rows();
        refined = attend_memory(tokens, ops::matmul(stored, lv.mem_key), ops::matmul(stored, lv.mem_value),
                                config_.temperature());
      }
      f = nn::from_tokens(refined, 1, H, W);
    }
    preds[j] = nn::conv(f, lv.head_w, lv.head_b, 1, 0);
    if (ablation.C) memory->level(j).write(slice_prototypes(tokens, preds[j]), slice_index);
    x = f;
  }
  return preds;
}

}  // namespace centerscan
