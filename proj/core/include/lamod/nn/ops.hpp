#pragma once

// Differentiable primitives. Image tensors are NCHW.

#include "lamod/nn/tensor.hpp"

namespace lamod::nn {

// 3x3 convolution, stride 1, zero padding 1. weight (Cout, Cin, 3, 3);
// bias (Cout) or undefined for no bias.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor());

// 2x2 average pooling; H and W must be even.
Tensor avgpool2(const Tensor& x);

// Nearest-neighbour 2x upsampling.
Tensor upsample2(const Tensor& x);

Tensor relu(const Tensor& x);

// Elementwise on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);

// Concatenate NCHW tensors along the channel axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// x (N, in) * weight (out, in)^T + bias (out).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// x (N, C, H, W) * (1 + scale[c]) + shift[c]; scale and shift hold C values.
Tensor scale_shift(const Tensor& x, const Tensor& scale, const Tensor& shift);

// Same values, new shape of equal element count.
Tensor reshape(const Tensor& x, Shape shape);

// Channels [begin, end) of an NCHW tensor.
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t end);

// Reductions to a one-element tensor.
Tensor sum(const Tensor& x);
Tensor sum_squares(const Tensor& x);
// Euclidean norm; subgradient 0 at the origin.
Tensor l2_norm(const Tensor& x);

}  // namespace lamod::nn
