// SPDX-License-Identifier: Apache-2.0
#include "centerscan/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "centerscan/ops.hpp"

namespace centerscan {

namespace {

void require_extent(const char* op, const Tensor& logits, const LabelMap& gt) {
  if (logits.rank() != 4 || logits.dim(0) != 1 || logits.dim(2) != gt.height || logits.dim(3) != gt.width) {
    throw ShapeError(std::string(op) + ": logits " + shape_str(logits.shape()) + " do not match label map " +
                     std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  if (gt.labels.size() != gt.height * gt.width) throw ShapeError(std::string(op) + ": malformed label map");
}

}  // namespace

Tensor one_hot(const LabelMap& gt, std::size_t K) {
  const std::size_t HW = gt.height * gt.width;
  std::vector<double> v(K * HW, 0.0);
  for (std::size_t i = 0; i < HW; ++i) {
    if (gt.labels[i] >= K) throw std::invalid_argument("one_hot: label exceeds class count");
    v[gt.labels[i] * HW + i] = 1.0;
  }
  return Tensor::from({1, K, gt.height, gt.width}, std::move(v));
}

void LossConfig::validate() const {
  for (double g : level_weights) {
    if (g < 0.0) throw std::invalid_argument("LossConfig: level weights must be >= 0");
  }
  if (focal_gamma < 0.0) throw std::invalid_argument("LossConfig: focal_gamma must be >= 0");
  if (class_balance < 0.0 || class_balance > 1.0) throw std::invalid_argument("LossConfig: class_balance in [0,1]");
  if (!(smooth > 0.0)) throw std::invalid_argument("LossConfig: smooth must be > 0");
}

Tensor dice_sym(const Tensor& logits, const LabelMap& gt, double smooth) {
  require_extent("dice_sym", logits, gt);
  const std::size_t K = logits.dim(1), HW = gt.height * gt.width;
  Tensor p = ops::reshape(ops::softmax(logits, 1), {K, HW});
  Tensor g = ops::reshape(one_hot(gt, K), {K, HW});
  Tensor inter = ops::sum_axis(ops::mul(p, g), 1);
  Tensor sp = ops::sum_axis(p, 1);
  Tensor sg = ops::sum_axis(g, 1);
  Tensor num = ops::add_scalar(ops::scale(inter, 2.0), smooth);
  Tensor den = ops::add_scalar(ops::add(sp, sg), smooth);
  return ops::add_scalar(ops::neg(ops::mean(ops::div(num, den))), 1.0);
}

std::vector<double> class_weights(const LabelMap& gt, std::size_t K, double class_balance) {
  std::vector<double> count(K, 0.0);
  for (auto l : gt.labels) count[l] += 1.0;
  const double total = static_cast<double>(gt.labels.size());
  std::vector<double> alpha(K, 1.0);
  for (std::size_t c = 0; c < K; ++c) {
    const double balanced = count[c] > 0.0 ? total / (static_cast<double>(K) * count[c]) : 0.0;
    alpha[c] = (1.0 - class_balance) + class_balance * balanced;
  }
  return alpha;
}

Tensor focal_mod(const Tensor& logits, const LabelMap& gt, const LossConfig& cfg) {
  require_extent("focal_mod", logits, gt);
  const std::size_t K = logits.dim(1), HW = gt.height * gt.width;
  Tensor logp = ops::log_softmax(logits, 1);
  std::vector<std::size_t> idx(HW);
  for (std::size_t i = 0; i < HW; ++i) {
    if (gt.labels[i] >= K) throw std::invalid_argument("focal_mod: label exceeds class count");
    idx[i] = gt.labels[i] * HW + i;
  }
  Tensor log_pt = ops::gather(logp, std::move(idx), {HW});
  const auto alpha_c = class_weights(gt, K, cfg.class_balance);
  std::vector<double> alpha(HW);
  for (std::size_t i = 0; i < HW; ++i) alpha[i] = alpha_c[gt.labels[i]];
  Tensor weighted = ops::mul(Tensor::from({HW}, std::move(alpha)), log_pt);
  if (cfg.focal_gamma != 0.0) {
    // Skipped for gamma = 0: d/dx x^0 is singular at p_t = 1.
    Tensor one_minus = ops::add_scalar(ops::neg(ops::exp(log_pt)), 1.0);
    weighted = ops::mul(ops::pow_scalar(one_minus, cfg.focal_gamma), weighted);
  }
  return ops::neg(ops::mean(weighted));
}

LossBreakdown hierarchical_loss(const std::vector<Tensor>& preds, const LabelMap& gt, const LossConfig& cfg) {
  cfg.validate();
  if (preds.size() != cfg.level_weights.size()) {
    throw std::invalid_argument("hierarchical_loss: " + std::to_string(preds.size()) + " predictions for " +
                                std::to_string(cfg.level_weights.size()) + " level weights");
  }
  LossBreakdown out;
  Tensor total;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    Tensor p = preds[j];
    if (p.dim(2) != gt.height || p.dim(3) != gt.width) p = ops::resize_bilinear(p, gt.height, gt.width);
    Tensor d = dice_sym(p, gt, cfg.smooth);
    Tensor f = focal_mod(p, gt, cfg);
    out.dice.push_back(d.item());
    out.focal.push_back(f.item());
    Tensor term = ops::scale(ops::add(d, f), cfg.level_weights[j]);
    total = total.defined() ? ops::add(total, term) : term;
  }
  out.total = total;
  return out;
}

}  // namespace centerscan
