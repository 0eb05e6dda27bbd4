// SPDX-License-Identifier: Apache-2.0
#include "centerscan/nn.hpp"

#include "centerscan/ops.hpp"

namespace centerscan::nn {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return ops::add_bias(ops::matmul(x, w), b, 1); }

Tensor affine(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  if (x.rank() != 2 || gain.numel() != x.dim(1)) {
    throw ShapeError("affine: gain " + shape_str(gain.shape()) + " does not match " + shape_str(x.shape()));
  }
  auto g = ops::broadcast_to(ops::reshape(gain, {1, x.dim(1)}), x.shape());
  return ops::add_bias(ops::mul(x, g), bias, 1);
}

Tensor to_tokens(const Tensor& fmap) {
  if (fmap.rank() != 4) throw ShapeError("to_tokens: expected rank 4, got " + shape_str(fmap.shape()));
  const auto& s = fmap.shape();
  return ops::reshape(ops::permute(fmap, {0, 2, 3, 1}), {s[0] * s[2] * s[3], s[1]});
}

Tensor from_tokens(const Tensor& tokens, std::size_t n, std::size_t h, std::size_t w) {
  if (tokens.rank() != 2 || tokens.dim(0) != n * h * w) {
    throw ShapeError("from_tokens: " + shape_str(tokens.shape()) + " is not " + std::to_string(n * h * w) + " tokens");
  }
  return ops::permute(ops::reshape(tokens, {n, h, w, tokens.dim(1)}), {0, 3, 1, 2});
}

Tensor channel_norm(const Tensor& fmap, const Tensor& gain, const Tensor& bias) {
  const auto& s = fmap.shape();
  return from_tokens(affine(ops::layer_norm(to_tokens(fmap)), gain, bias), s[0], s[2], s[3]);
}

Tensor conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t padding) {
  return ops::add_bias(ops::conv2d(x, w, stride, padding), b, 1);
}

Tensor crop_hw(const Tensor& x, std::size_t h, std::size_t w) {
  Tensor out = x;
  if (out.dim(2) != h) out = ops::slice(out, 2, 0, h);
  if (out.dim(3) != w) out = ops::slice(out, 3, 0, w);
  return out;
}

}  // namespace centerscan::nn
