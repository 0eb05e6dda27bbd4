// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "centerscan/tensor.hpp"

namespace centerscan {

/// Piecewise-constant learning rate: base_lr * factor^(milestones passed).
struct StepDecaySchedule {
  double base_lr = 1e-4;
  double factor = 0.5;
  std::vector<std::size_t> milestones;  // step indices, ascending

  double lr_at(std::size_t step) const;
  /// Maps epoch milestones of a reference run of `reference_epochs` onto
  /// `total_steps`, preserving their relative position.
  static StepDecaySchedule rescaled(double base_lr, double factor, const std::vector<double>& epoch_milestones,
                                    double reference_epochs, std::size_t total_steps);
};

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// One update from the currently accumulated gradients.
  void step(double lr);
  void zero_grad();
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

}  // namespace centerscan
