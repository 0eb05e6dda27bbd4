// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "centerscan/tensor.hpp"

namespace centerscan {

/// Dense per-pixel class labels of one slice.
struct LabelMap {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> labels;  // row-major, values < num_classes

  std::size_t size() const { return labels.size(); }
  bool operator==(const LabelMap&) const = default;
};

/// (1, K, H, W) indicator tensor of a label map.
Tensor one_hot(const LabelMap& gt, std::size_t num_classes);

struct LossConfig {
  std::vector<double> level_weights{1.0, 1.0, 1.0, 1.0};
  double focal_gamma = 2.0;
  /// 0: uniform class weights, 1: fully inverse-frequency balanced.
  double class_balance = 1.0;
  double smooth = 1.0;

  void validate() const;
};

/// 1 - mean_c (2 sum p_c g_c + s) / (sum p_c + sum g_c + s), p = softmax over classes.
/// logits: (1, K, H, W) at the label map's extent.
Tensor dice_sym(const Tensor& logits, const LabelMap& gt, double smooth = 1.0);

/// Per-class weights alpha_c, inverse class frequency in gt blended with 1.
std::vector<double> class_weights(const LabelMap& gt, std::size_t num_classes, double class_balance);

/// mean over pixels of -alpha_c (1 - p_t)^gamma log p_t.
Tensor focal_mod(const Tensor& logits, const LabelMap& gt, const LossConfig& cfg);

struct LossBreakdown {
  Tensor total;
  std::vector<double> dice;   // per level, unweighted
  std::vector<double> focal;  // per level, unweighted
};

/// sum_j gamma_j [dice_sym(P_j) + focal_mod(P_j)], each P_j bilinearly
/// resized to the label map's extent first.
LossBreakdown hierarchical_loss(const std::vector<Tensor>& preds, const LabelMap& gt, const LossConfig& cfg);

}  // namespace centerscan
