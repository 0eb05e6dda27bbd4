// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "centerscan/losses.hpp"

namespace centerscan {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  ConfusionCounts& operator+=(const ConfusionCounts& o);
};

/// Foreground = any nonzero label.
ConfusionCounts confusion(const LabelMap& pred, const LabelMap& gt);

/// Overlap metrics from pooled counts. When prediction and ground truth are
/// both empty every metric is 1; any other 0/0 ratio is 0.
struct MetricReport {
  double dice = 0.0, iou = 0.0, precision = 0.0, sensitivity = 0.0;
  ConfusionCounts counts;

  static MetricReport from_counts(const ConfusionCounts& c);
  /// |dice - 2 iou / (1 + iou)| <= tol.
  bool dice_iou_identity(double tol = 1e-12) const;
  bool in_unit_range() const;
};

MetricReport compute_metrics(const std::vector<LabelMap>& pred, const std::vector<LabelMap>& gt);

}  // namespace centerscan
