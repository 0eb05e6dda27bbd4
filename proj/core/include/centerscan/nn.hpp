// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "centerscan/tensor.hpp"

// Layer-level helpers composed from ops primitives.
namespace centerscan::nn {

/// x (T, in) * w (in, out) + b (out).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
/// Per-column gain and bias on (T, C).
Tensor affine(const Tensor& x, const Tensor& gain, const Tensor& bias);

/// (N, C, H, W) -> (N*H*W, C), pixel-major.
Tensor to_tokens(const Tensor& fmap);
/// Inverse of to_tokens.
Tensor from_tokens(const Tensor& tokens, std::size_t n, std::size_t h, std::size_t w);

/// Layer norm across channels at every pixel, with affine parameters.
Tensor channel_norm(const Tensor& fmap, const Tensor& gain, const Tensor& bias);
Tensor conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t padding);
/// Crops the trailing two axes to (h, w) from the top-left corner.
Tensor crop_hw(const Tensor& x, std::size_t h, std::size_t w);

}  // namespace centerscan::nn
