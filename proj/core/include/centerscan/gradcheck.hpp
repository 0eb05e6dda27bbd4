// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "centerscan/tensor.hpp"

namespace centerscan {

/// Central-difference gradient of a scalar function of x:
/// (f(x + h e_i) - f(x - h e_i)) / 2h for every element i.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double step = 1e-6);

/// Same estimate for a leaf that f reads implicitly (e.g. a parameter owned by
/// a module). The leaf is perturbed in place and restored bitwise.
/// When max_entries > 0 only that many evenly strided elements are probed and
/// the rest are left at zero; `probed` receives the probed indices.
std::vector<double> finite_diff_grad_inplace(const std::function<double()>& f, Tensor& leaf, double step = 1e-6,
                                             std::size_t max_entries = 0,
                                             std::vector<std::size_t>* probed = nullptr);

/// ||a - b||_2 / max(||a||_2, ||b||_2), 0 when both vanish.
double relative_error(std::span<const double> a, std::span<const double> b);

struct GradCheckEntry {
  std::string name;
  double rel_error = 0.0;
  std::size_t probed = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error() const;
  bool passed(double tol) const { return max_rel_error() <= tol; }
};

/// Compares reverse mode against central differences for every named leaf.
/// `loss` must rebuild the graph from scratch on each call.
GradCheckReport check_gradients(const std::function<Tensor()>& loss,
                                const std::vector<std::pair<std::string, Tensor>>& leaves, double step = 1e-6,
                                std::size_t max_entries_per_leaf = 0);

}  // namespace centerscan
