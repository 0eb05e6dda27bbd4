// SPDX-License-Identifier: Apache-2.0
#include "centerscan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace centerscan::ops {

using detail::Node;

namespace {

[[noreturn]] void fail(const char* op, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what);
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    fail(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(x.shape()));
  }
}

// Gradient sink for parent i, or nullptr when that parent is constant.
double* sink(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? p.grad_buffer().data() : nullptr;
}

const double* pdata(Node& self, std::size_t i) { return self.parents[i]->data.data(); }

// (outer, extent, inner) view of one axis of a row-major shape.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

template <typename F, typename D>
Tensor unary(const Tensor& x, const char* op, F f, D df) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor::make(x.shape(), std::move(out), {x}, op, [df](Node& self) {
    double* g = sink(self, 0);
    const double* xin = pdata(self, 0);
    for (std::size_t i = 0; i < self.data.size(); ++i) g[i] += self.grad[i] * df(xin[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return Tensor::make(a.shape(), std::move(out), {a, b}, "add", [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (double* g = sink(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return Tensor::make(a.shape(), std::move(out), {a, b}, "sub", [](Node& self) {
    if (double* g = sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = sink(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return Tensor::make(a.shape(), std::move(out), {a, b}, "mul", [](Node& self) {
    const double* av = pdata(self, 0);
    const double* bv = pdata(self, 1);
    if (double* g = sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (double* g = sink(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same("div", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) / b.at(i);
  return Tensor::make(a.shape(), std::move(out), {a, b}, "div", [](Node& self) {
    const double* bv = pdata(self, 1);
    if (double* g = sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] / bv[i];
    }
    if (double* g = sink(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i] * self.data[i] / bv[i];
    }
  });
}

Tensor scale(const Tensor& x, double s) {
  return unary(x, "scale", [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary(x, "add_scalar", [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, "silu", [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor pow_scalar(const Tensor& x, double p) {
  return unary(
      x, "pow_scalar", [p](double v) { return std::pow(v, p); },
      [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) fail("matmul", "inner extents differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
    }
  }
  return Tensor::make({m, n}, std::move(out), {a, b}, "matmul", [m, k, n](Node& self) {
    const double* Av = pdata(self, 0);
    const double* Bv = pdata(self, 1);
    const double* G = self.grad.data();
    if (double* ga = sink(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * Bv[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (double* gb = sink(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = Av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  return permute(a, {1, 0});
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    fail("reshape", "cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make(std::move(shape), std::move(out), {x}, "reshape", [](Node& self) {
    double* g = sink(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor gather(const Tensor& x, std::vector<std::size_t> index, Shape out_shape) {
  if (shape_numel(out_shape) != index.size()) {
    fail("gather", "index count " + std::to_string(index.size()) + " does not fill " + shape_str(out_shape));
  }
  const std::size_t n = x.numel();
  std::vector<double> out(index.size());
  auto in = x.data();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) fail("gather", "index " + std::to_string(index[i]) + " out of range for " + shape_str(x.shape()));
    out[i] = in[index[i]];
  }
  return Tensor::make(std::move(out_shape), std::move(out), {x}, "gather", [idx = std::move(index)](Node& self) {
    double* g = sink(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += self.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const auto& in_shape = x.shape();
  if (perm.size() != in_shape.size()) fail("permute", "permutation rank differs from " + shape_str(in_shape));
  std::vector<bool> seen(perm.size(), false);
  Shape out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= perm.size() || seen[perm[i]]) fail("permute", "invalid permutation for " + shape_str(in_shape));
    seen[perm[i]] = true;
    out_shape[i] = in_shape[perm[i]];
  }
  auto in_strides = strides_of(in_shape);
  std::vector<std::size_t> index(x.numel());
  std::vector<std::size_t> counter(perm.size(), 0);
  for (std::size_t flat = 0; flat < index.size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < perm.size(); ++d) src += counter[d] * in_strides[perm[d]];
    index[flat] = src;
    for (std::size_t d = perm.size(); d-- > 0;) {
      if (++counter[d] < out_shape[d]) break;
      counter[d] = 0;
    }
  }
  return gather(x, std::move(index), std::move(out_shape));
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank()) fail("slice", "axis out of range for " + shape_str(x.shape()));
  if (length == 0 || start + length > x.dim(axis)) {
    fail("slice", "range [" + std::to_string(start) + "," + std::to_string(start + length) + ") exceeds axis " +
                      std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  auto v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<std::size_t> index;
  index.reserve(v.outer * length * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t a = start; a < start + length; ++a)
      for (std::size_t i = 0; i < v.inner; ++i) index.push_back((o * v.extent + a) * v.inner + i);
  return gather(x, std::move(index), std::move(out_shape));
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  const auto& in_shape = x.shape();
  if (in_shape.size() != shape.size()) {
    fail("broadcast_to", "rank mismatch " + shape_str(in_shape) + " vs " + shape_str(shape));
  }
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (in_shape[d] != shape[d] && in_shape[d] != 1) {
      fail("broadcast_to", "cannot expand " + shape_str(in_shape) + " to " + shape_str(shape));
    }
  }
  auto in_strides = strides_of(in_shape);
  std::vector<std::size_t> index(shape_numel(shape));
  std::vector<std::size_t> counter(shape.size(), 0);
  for (std::size_t flat = 0; flat < index.size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) src += (in_shape[d] == 1 ? 0 : counter[d]) * in_strides[d];
    index[flat] = src;
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++counter[d] < shape[d]) break;
      counter[d] = 0;
    }
  }
  return gather(x, std::move(index), shape);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) fail("concat", "no operands");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) fail("concat", "axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) fail("concat", "incompatible operands " + shape_str(first) + " and " + shape_str(s));
    out_shape[axis] += s[axis];
  }
  auto v = axis_view(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t ext = p.dim(axis);
    auto in = p.data();
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t a = 0; a < ext; ++a)
        std::copy_n(in.begin() + (o * ext + a) * v.inner, v.inner,
                    out.begin() + (o * v.extent + off + a) * v.inner);
    off += ext;
  }
  std::vector<std::size_t> extents;
  for (const auto& p : parts) extents.push_back(p.dim(axis));
  return Tensor::make(std::move(out_shape), std::move(out), parts, "concat",
                      [v, offsets, extents](Node& self) {
                        for (std::size_t k = 0; k < extents.size(); ++k) {
                          double* g = sink(self, k);
                          if (!g) continue;
                          for (std::size_t o = 0; o < v.outer; ++o)
                            for (std::size_t a = 0; a < extents[k]; ++a)
                              for (std::size_t i = 0; i < v.inner; ++i)
                                g[(o * extents[k] + a) * v.inner + i] +=
                                    self.grad[(o * v.extent + offsets[k] + a) * v.inner + i];
                        }
                      });
}

Tensor add_bias(const Tensor& x, const Tensor& b, std::size_t axis) {
  if (axis >= x.rank() || b.rank() != 1 || b.numel() != x.dim(axis)) {
    fail("add_bias", "bias " + shape_str(b.shape()) + " does not match axis " + std::to_string(axis) + " of " +
                         shape_str(x.shape()));
  }
  auto v = axis_view(x.shape(), axis);
  std::vector<double> out(x.data().begin(), x.data().end());
  auto bv = b.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t a = 0; a < v.extent; ++a)
      for (std::size_t i = 0; i < v.inner; ++i) out[(o * v.extent + a) * v.inner + i] += bv[a];
  return Tensor::make(x.shape(), std::move(out), {x, b}, "add_bias", [v](Node& self) {
    if (double* g = sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = sink(self, 1)) {
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t a = 0; a < v.extent; ++a)
          for (std::size_t i = 0; i < v.inner; ++i) g[a] += self.grad[(o * v.extent + a) * v.inner + i];
    }
  });
}

Tensor sum(const Tensor& x) {
  auto in = x.data();
  double s = std::accumulate(in.begin(), in.end(), 0.0);
  return Tensor::make({1}, {s}, {x}, "sum", [](Node& self) {
    double* g = sink(self, 0);
    const std::size_t n = self.parents[0]->data.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) fail("sum_axis", "axis out of range for " + shape_str(x.shape()));
  auto v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  std::vector<double> out(v.outer * v.inner, 0.0);
  auto in = x.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t a = 0; a < v.extent; ++a)
      for (std::size_t i = 0; i < v.inner; ++i) out[o * v.inner + i] += in[(o * v.extent + a) * v.inner + i];
  return Tensor::make(std::move(out_shape), std::move(out), {x}, "sum_axis", [v](Node& self) {
    double* g = sink(self, 0);
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t a = 0; a < v.extent; ++a)
        for (std::size_t i = 0; i < v.inner; ++i) g[(o * v.extent + a) * v.inner + i] += self.grad[o * v.inner + i];
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  return scale(sum_axis(x, axis), 1.0 / static_cast<double>(x.dim(axis)));
}

Tensor max_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) fail("max_axis", "axis out of range for " + shape_str(x.shape()));
  auto v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  std::vector<double> out(v.outer * v.inner);
  std::vector<std::size_t> arg(v.outer * v.inner);
  auto in = x.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      std::size_t best = o * v.extent * v.inner + i;
      for (std::size_t a = 1; a < v.extent; ++a) {
        std::size_t at = (o * v.extent + a) * v.inner + i;
        if (in[at] > in[best]) best = at;
      }
      out[o * v.inner + i] = in[best];
      arg[o * v.inner + i] = best;
    }
  return Tensor::make(std::move(out_shape), std::move(out), {x}, "max_axis", [arg = std::move(arg)](Node& self) {
    double* g = sink(self, 0);
    for (std::size_t k = 0; k < arg.size(); ++k) g[arg[k]] += self.grad[k];
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) fail("softmax", "axis out of range for " + shape_str(x.shape()));
  auto v = axis_view(x.shape(), axis);
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < v.extent; ++a) mx = std::max(mx, in[base + a * v.inner]);
      double z = 0.0;
      for (std::size_t a = 0; a < v.extent; ++a) z += out[base + a * v.inner] = std::exp(in[base + a * v.inner] - mx);
      for (std::size_t a = 0; a < v.extent; ++a) out[base + a * v.inner] /= z;
    }
  return Tensor::make(x.shape(), std::move(out), {x}, "softmax", [v](Node& self) {
    double* g = sink(self, 0);
    const double* y = self.data.data();
    const double* gy = self.grad.data();
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.extent * v.inner + i;
        double dot = 0.0;
        for (std::size_t a = 0; a < v.extent; ++a) dot += gy[base + a * v.inner] * y[base + a * v.inner];
        for (std::size_t a = 0; a < v.extent; ++a) {
          const std::size_t at = base + a * v.inner;
          g[at] += y[at] * (gy[at] - dot);
        }
      }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) fail("log_softmax", "axis out of range for " + shape_str(x.shape()));
  auto v = axis_view(x.shape(), axis);
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < v.extent; ++a) mx = std::max(mx, in[base + a * v.inner]);
      double z = 0.0;
      for (std::size_t a = 0; a < v.extent; ++a) z += std::exp(in[base + a * v.inner] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t a = 0; a < v.extent; ++a) out[base + a * v.inner] = in[base + a * v.inner] - lz;
    }
  return Tensor::make(x.shape(), std::move(out), {x}, "log_softmax", [v](Node& self) {
    double* g = sink(self, 0);
    const double* y = self.data.data();
    const double* gy = self.grad.data();
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.extent * v.inner + i;
        double total = 0.0;
        for (std::size_t a = 0; a < v.extent; ++a) total += gy[base + a * v.inner];
        for (std::size_t a = 0; a < v.extent; ++a) {
          const std::size_t at = base + a * v.inner;
          g[at] += gy[at] - std::exp(y[at]) * total;
        }
      }
  });
}

Tensor layer_norm(const Tensor& x, double eps) {
  if (x.rank() < 1) fail("layer_norm", "scalar operand");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  std::vector<double> out(x.numel());
  std::vector<double> inv_std(rows);
  auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = (row[j] - mu) * is;
  }
  return Tensor::make(x.shape(), std::move(out), {x}, "layer_norm", [d, rows, inv_std](Node& self) {
    double* g = sink(self, 0);
    const double* xhat = self.data.data();
    const double* gy = self.grad.data();
    for (std::size_t r = 0; r < rows; ++r) {
      double mg = 0.0, mgx = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        mg += gy[r * d + j];
        mgx += gy[r * d + j] * xhat[r * d + j];
      }
      mg /= static_cast<double>(d);
      mgx /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t at = r * d + j;
        g[at] += inv_std[r] * (gy[at] - mg - xhat[at] * mgx);
      }
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t padding) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", w, 4);
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  if (w.dim(1) != C) fail("conv2d", "weight " + shape_str(w.shape()) + " does not match input " + shape_str(x.shape()));
  if (stride == 0) fail("conv2d", "zero stride");
  if (H + 2 * padding < KH || W + 2 * padding < KW) {
    fail("conv2d", "kernel " + shape_str(w.shape()) + " larger than padded input " + shape_str(x.shape()));
  }
  const std::size_t OH = (H + 2 * padding - KH) / stride + 1;
  const std::size_t OW = (W + 2 * padding - KW) / stride + 1;
  std::vector<double> out(N * O * OH * OW, 0.0);
  auto X = x.data();
  auto Wt = w.data();
  const long pad = static_cast<long>(padding);
  // Shared index walk for forward and both backward passes.
  auto walk = [=](auto&& body) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t ki = 0; ki < KH; ++ki)
            for (std::size_t kj = 0; kj < KW; ++kj) {
              const std::size_t widx = ((o * C + c) * KH + ki) * KW + kj;
              for (std::size_t oh = 0; oh < OH; ++oh) {
                const long ih = static_cast<long>(oh * stride + ki) - pad;
                if (ih < 0 || ih >= static_cast<long>(H)) continue;
                const std::size_t xrow = ((n * C + c) * H + static_cast<std::size_t>(ih)) * W;
                const std::size_t orow = ((n * O + o) * OH + oh) * OW;
                for (std::size_t ow = 0; ow < OW; ++ow) {
                  const long iw = static_cast<long>(ow * stride + kj) - pad;
                  if (iw < 0 || iw >= static_cast<long>(W)) continue;
                  body(xrow + static_cast<std::size_t>(iw), widx, orow + ow);
                }
              }
            }
  };
  walk([&](std::size_t xi, std::size_t wi, std::size_t oi) { out[oi] += X[xi] * Wt[wi]; });
  return Tensor::make({N, O, OH, OW}, std::move(out), {x, w}, "conv2d", [walk](Node& self) {
    const double* Xv = pdata(self, 0);
    const double* Wv = pdata(self, 1);
    const double* G = self.grad.data();
    double* gx = sink(self, 0);
    double* gw = sink(self, 1);
    if (gx) walk([&](std::size_t xi, std::size_t wi, std::size_t oi) { gx[xi] += G[oi] * Wv[wi]; });
    if (gw) walk([&](std::size_t xi, std::size_t wi, std::size_t oi) { gw[wi] += G[oi] * Xv[xi]; });
  });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, std::size_t stride) {
  require_rank("conv_transpose2d", x, 4);
  require_rank("conv_transpose2d", w, 4);
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(1), KH = w.dim(2), KW = w.dim(3);
  if (w.dim(0) != C) {
    fail("conv_transpose2d", "weight " + shape_str(w.shape()) + " does not match input " + shape_str(x.shape()));
  }
  if (stride == 0) fail("conv_transpose2d", "zero stride");
  const std::size_t OH = (H - 1) * stride + KH;
  const std::size_t OW = (W - 1) * stride + KW;
  std::vector<double> out(N * O * OH * OW, 0.0);
  auto walk = [=](auto&& body) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t o = 0; o < O; ++o)
          for (std::size_t ki = 0; ki < KH; ++ki)
            for (std::size_t kj = 0; kj < KW; ++kj) {
              const std::size_t widx = ((c * O + o) * KH + ki) * KW + kj;
              for (std::size_t h = 0; h < H; ++h) {
                const std::size_t xrow = ((n * C + c) * H + h) * W;
                const std::size_t orow = ((n * O + o) * OH + h * stride + ki) * OW + kj;
                for (std::size_t ww = 0; ww < W; ++ww) body(xrow + ww, widx, orow + ww * stride);
              }
            }
  };
  auto X = x.data();
  auto Wt = w.data();
  walk([&](std::size_t xi, std::size_t wi, std::size_t oi) { out[oi] += X[xi] * Wt[wi]; });
  return Tensor::make({N, O, OH, OW}, std::move(out), {x, w}, "conv_transpose2d", [walk](Node& self) {
    const double* Xv = pdata(self, 0);
    const double* Wv = pdata(self, 1);
    const double* G = self.grad.data();
    double* gx = sink(self, 0);
    double* gw = sink(self, 1);
    if (gx) walk([&](std::size_t xi, std::size_t wi, std::size_t oi) { gx[xi] += G[oi] * Wv[wi]; });
    if (gw) walk([&](std::size_t xi, std::size_t wi, std::size_t oi) { gw[wi] += G[oi] * Xv[xi]; });
  });
}

namespace {

struct LerpTap {
  std::size_t lo, hi;
  double frac;
};

std::vector<LerpTap> lerp_taps(std::size_t in, std::size_t out) {
  std::vector<LerpTap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = std::max(0.0, (static_cast<double>(i) + 0.5) * ratio - 0.5);
    auto lo = std::min(static_cast<std::size_t>(std::floor(src)), in - 1);
    taps[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank("resize_bilinear", x, 4);
  if (out_h == 0 || out_w == 0) fail("resize_bilinear", "zero output extent");
  const std::size_t NC = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
  auto ty = lerp_taps(H, out_h);
  auto tx = lerp_taps(W, out_w);
  std::vector<double> out(NC * out_h * out_w);
  auto X = x.data();
  for (std::size_t p = 0; p < NC; ++p)
    for (std::size_t i = 0; i < out_h; ++i)
      for (std::size_t j = 0; j < out_w; ++j) {
        const double* plane = X.data() + p * H * W;
        const auto& a = ty[i];
        const auto& b = tx[j];
        const double top = plane[a.lo * W + b.lo] * (1 - b.frac) + plane[a.lo * W + b.hi] * b.frac;
        const double bot = plane[a.hi * W + b.lo] * (1 - b.frac) + plane[a.hi * W + b.hi] * b.frac;
        out[(p * out_h + i) * out_w + j] = top * (1 - a.frac) + bot * a.frac;
      }
  Shape shape{x.dim(0), x.dim(1), out_h, out_w};
  return Tensor::make(std::move(shape), std::move(out), {x}, "resize_bilinear",
                      [NC, H, W, out_h, out_w, ty, tx](Node& self) {
                        double* g = sink(self, 0);
                        for (std::size_t p = 0; p < NC; ++p)
                          for (std::size_t i = 0; i < out_h; ++i)
                            for (std::size_t j = 0; j < out_w; ++j) {
                              const double go = self.grad[(p * out_h + i) * out_w + j];
                              double* plane = g + p * H * W;
                              const auto& a = ty[i];
                              const auto& b = tx[j];
                              plane[a.lo * W + b.lo] += go * (1 - a.frac) * (1 - b.frac);
                              plane[a.lo * W + b.hi] += go * (1 - a.frac) * b.frac;
                              plane[a.hi * W + b.lo] += go * a.frac * (1 - b.frac);
                              plane[a.hi * W + b.hi] += go * a.frac * b.frac;
                            }
                      });
}

}  // namespace centerscan::ops
