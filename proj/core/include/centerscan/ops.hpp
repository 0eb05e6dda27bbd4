// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "centerscan/tensor.hpp"

// Differentiable primitives. Every function validates operand shapes and
// throws ShapeError naming the primitive and the offending shapes.
namespace centerscan::ops {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor pow_scalar(const Tensor& x, double p);

// 2-D linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Layout. All of these are gathers underneath.
Tensor reshape(const Tensor& x, Shape shape);
/// out.flat[i] = x.flat[index[i]]; duplicate indices scatter-add on backward.
Tensor gather(const Tensor& x, std::vector<std::size_t> index, Shape out_shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
/// Expands size-1 axes of x (same rank) to the target extents.
Tensor broadcast_to(const Tensor& x, const Shape& shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

/// x + b where b is 1-D with b.numel() == x.shape[axis], broadcast elsewhere.
Tensor add_bias(const Tensor& x, const Tensor& b, std::size_t axis);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Keeps the reduced axis with extent 1.
Tensor sum_axis(const Tensor& x, std::size_t axis);
Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor max_axis(const Tensor& x, std::size_t axis);

// Normalization. Softmax subtracts the per-line max before exponentiating.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);
/// Normalizes each row over the last axis (no affine part).
Tensor layer_norm(const Tensor& x, double eps = 1e-5);

// Spatial, NCHW.
/// w: (out, in, kh, kw).
Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride = 1, std::size_t padding = 0);
/// w: (in, out, k, k); output extent (H-1)*stride + k.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, std::size_t stride = 2);
/// Half-pixel-centred bilinear resampling (align_corners = false).
Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);

}  // namespace centerscan::ops

namespace centerscan {

inline Tensor operator+(const Tensor& a, const Tensor& b) { return ops::add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return ops::sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return ops::mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return ops::scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return ops::scale(a, s); }

}  // namespace centerscan
