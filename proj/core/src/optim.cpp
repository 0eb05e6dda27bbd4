// SPDX-License-Identifier: Apache-2.0
#include "centerscan/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace centerscan {

double StepDecaySchedule::lr_at(std::size_t step) const {
  double lr = base_lr;
  for (auto m : milestones) {
    if (step >= m) lr *= factor;
  }
  return lr;
}

StepDecaySchedule StepDecaySchedule::rescaled(double base_lr, double factor,
                                              const std::vector<double>& epoch_milestones,
                                              double reference_epochs, std::size_t total_steps) {
  if (!(reference_epochs > 0.0)) throw std::invalid_argument("StepDecaySchedule: reference_epochs must be positive");
  StepDecaySchedule s{base_lr, factor, {}};
  for (double e : epoch_milestones) {
    s.milestones.push_back(static_cast<std::size_t>(std::llround(e / reference_epochs * static_cast<double>(total_steps))));
  }
  return s;
}

Adam::Adam(std::vector<Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto g = params_[k].grad();
    auto w = params_[k].mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace centerscan
