// SPDX-License-Identifier: Apache-2.0
#include "centerscan/training.hpp"

#include <algorithm>
#include <stdexcept>

#include "centerscan/ops.hpp"
#include "centerscan/optim.hpp"

namespace centerscan {

void TrainConfig::validate() const {
  if (slices_per_step == 0) throw std::invalid_argument("TrainConfig: slices_per_step must be positive");
  if (!(base_lr > 0.0)) throw std::invalid_argument("TrainConfig: base_lr must be positive");
  if (!(lr_factor > 0.0)) throw std::invalid_argument("TrainConfig: lr_factor must be positive");
  if (!(reference_epochs > 0.0)) throw std::invalid_argument("TrainConfig: reference_epochs must be positive");
}

StepDecaySchedule TrainConfig::schedule() const {
  return StepDecaySchedule::rescaled(base_lr, lr_factor, epoch_milestones, reference_epochs, steps);
}

std::vector<LossRow> train_model(SegmentationModel& model, const std::vector<SyntheticVolume>& volumes,
                                 const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (volumes.empty()) throw std::invalid_argument("train_model: no training volumes");
  auto params = model.parameters().trainable();
  if (params.empty()) throw std::invalid_argument("train_model: model has no trainable parameters");
  Adam opt(params);
  const StepDecaySchedule sched = cfg.schedule();
  const std::size_t levels = model.config().decoder.levels;

  std::vector<LossRow> rows;
  rows.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const SyntheticVolume& vol = volumes[rng.index(volumes.size())];
    const std::size_t run = std::min(cfg.slices_per_step, vol.slices());
    const std::size_t first = rng.index(vol.slices() - run + 1);

    VolumeState state = model.new_volume_state();
    LossRow row;
    row.step = step;
    row.lr = sched.lr_at(step);
    row.dice.assign(levels, 0.0);
    row.focal.assign(levels, 0.0);

    Tensor total;
    for (std::size_t s = first; s < first + run; ++s) {
      auto preds = model.forward_slice(vol.slice_tensor(s), state, static_cast<int>(s));
      LossBreakdown lb = model.slice_loss(preds, vol.masks[s]);
      total = total.node() ? ops::add(total, lb.total) : lb.total;
      for (std::size_t j = 0; j < levels; ++j) {
        row.dice[j] += lb.dice[j] / static_cast<double>(run);
        row.focal[j] += lb.focal[j] / static_cast<double>(run);
      }
    }
    total = ops::scale(total, 1.0 / static_cast<double>(run));
    row.total = total.item();

    opt.zero_grad();
    backward(total);
    opt.step(row.lr);
    rows.push_back(std::move(row));
  }
  return rows;
}

EvalResult evaluate_model(const SegmentationModel& model, const std::vector<SyntheticVolume>& volumes) {
  EvalResult out;
  ConfusionCounts pooled;
  for (const auto& vol : volumes) {
    auto pred = model.predict_volume(vol);
    ConfusionCounts c;
    for (std::size_t s = 0; s < pred.size(); ++s) c += confusion(pred[s], vol.masks[s]);
    out.per_volume.push_back(MetricReport::from_counts(c));
    pooled += c;
  }
  out.aggregate = MetricReport::from_counts(pooled);
  return out;
}

}  // namespace centerscan
