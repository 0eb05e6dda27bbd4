// SPDX-License-Identifier: Apache-2.0
#include "centerscan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace centerscan {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  Tensor probe = x.clone();
  std::vector<double> out(x.numel());
  auto d = probe.mutable_data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double orig = d[i];
    d[i] = orig + step;
    const double fp = f(probe);
    d[i] = orig - step;
    const double fm = f(probe);
    d[i] = orig;
    out[i] = (fp - fm) / (2.0 * step);
  }
  return Tensor::from(x.shape(), std::move(out));
}

std::vector<double> finite_diff_grad_inplace(const std::function<double()>& f, Tensor& leaf, double step,
                                             std::size_t max_entries, std::vector<std::size_t>* probed) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  const std::size_t n = leaf.numel();
  std::vector<std::size_t> idx;
  if (max_entries == 0 || max_entries >= n) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  } else {
    for (std::size_t k = 0; k < max_entries; ++k) idx.push_back(k * n / max_entries);
  }
  std::vector<double> out(n, 0.0);
  auto d = leaf.mutable_data();
  for (auto i : idx) {
    const double orig = d[i];
    d[i] = orig + step;
    const double fp = f();
    d[i] = orig - step;
    const double fm = f();
    d[i] = orig;
    out[i] = (fp - fm) / (2.0 * step);
  }
  if (probed) *probed = std::move(idx);
  return out;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.rel_error);
  return m;
}

GradCheckReport check_gradients(const std::function<Tensor()>& loss,
                                const std::vector<std::pair<std::string, Tensor>>& leaves, double step,
                                std::size_t max_entries_per_leaf) {
  for (auto [name, t] : leaves) t.zero_grad();
  backward(loss());
  GradCheckReport report;
  for (auto [name, t] : leaves) {
    std::vector<std::size_t> probed;
    auto numeric = finite_diff_grad_inplace([&] { return loss().item(); }, t, step, max_entries_per_leaf, &probed);
    std::vector<double> analytic, estimate;
    auto g = t.grad();
    for (auto i : probed) {
      analytic.push_back(g[i]);
      estimate.push_back(numeric[i]);
    }
    report.entries.push_back({name, relative_error(analytic, estimate), probed.size()});
  }
  return report;
}

}  // namespace centerscan
