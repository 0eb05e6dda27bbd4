// SPDX-License-Identifier: Apache-2.0
#include "centerscan/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace centerscan {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

ConfusionCounts confusion(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width || pred.labels.size() != gt.labels.size()) {
    throw std::invalid_argument("compute_metrics: prediction " + std::to_string(pred.height) + "x" +
                                std::to_string(pred.width) + " does not match ground truth " +
                                std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const bool p = pred.labels[i] != 0, g = gt.labels[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

MetricReport MetricReport::from_counts(const ConfusionCounts& c) {
  MetricReport r;
  r.counts = c;
  if (c.tp + c.fp + c.fn == 0) {
    r.dice = r.iou = r.precision = r.sensitivity = 1.0;
    return r;
  }
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  r.dice = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  r.iou = ratio(tp, tp + fp + fn);
  r.precision = ratio(tp, tp + fp);
  r.sensitivity = ratio(tp, tp + fn);
  return r;
}

bool MetricReport::dice_iou_identity(double tol) const { return std::abs(dice - 2.0 * iou / (1.0 + iou)) <= tol; }

bool MetricReport::in_unit_range() const {
  for (double v : {dice, iou, precision, sensitivity}) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
  }
  return iou <= dice;
}

MetricReport compute_metrics(const std::vector<LabelMap>& pred, const std::vector<LabelMap>& gt) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(pred.size()) + " predictions for " +
                                std::to_string(gt.size()) + " masks");
  }
  ConfusionCounts total;
  for (std::size_t i = 0; i < pred.size(); ++i) total += confusion(pred[i], gt[i]);
  return MetricReport::from_counts(total);
}

}  // namespace centerscan
