// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "centerscan/metrics.hpp"
#include "centerscan/model.hpp"
#include "centerscan/optim.hpp"
#include "centerscan/synthetic.hpp"

namespace centerscan {

struct TrainConfig {
  std::size_t steps = 300;
  std::size_t slices_per_step = 4;  // consecutive slices of one volume
  double base_lr = 1e-2;
  double lr_factor = 0.5;
  std::vector<double> epoch_milestones{7.0, 12.0};
  double reference_epochs = 200.0;

  void validate() const;
  StepDecaySchedule schedule() const;
};

struct LossRow {
  std::size_t step = 0;
  double total = 0.0;
  double lr = 0.0;
  std::vector<double> dice, focal;  // per level, mean over the step's slices
};

/// Adam on the model's trainable parameters. Each step draws a volume and a
/// run of consecutive slices from `rng`, starts from empty memory, and
/// backpropagates the mean slice loss.
std::vector<LossRow> train_model(SegmentationModel& model, const std::vector<SyntheticVolume>& volumes,
                                 const TrainConfig& cfg, Rng& rng);

struct EvalResult {
  std::vector<MetricReport> per_volume;
  MetricReport aggregate;  // pooled over every slice of every volume
};

EvalResult evaluate_model(const SegmentationModel& model, const std::vector<SyntheticVolume>& volumes);

}  // namespace centerscan
