// Copyright 2026 The talkface Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "talkface/tensor.hpp"

namespace talkface::ops {

// Elementwise binary operations broadcast with right-aligned extents.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor softplus(const Tensor& x);
Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
// Rows of equal-length vectors stacked into an N x d matrix.
Tensor stack_rows(std::span<const Tensor> rows);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end);
Tensor diagonal(const Tensor& square_matrix);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& x, std::size_t axis, bool keepdim = false);
// Population variance along an axis.
Tensor variance(const Tensor& x, std::size_t axis, bool keepdim = false);

Tensor l1_norm(const Tensor& x);
Tensor l2_norm(const Tensor& x);
// Rows of a 2-D tensor (or a single vector) scaled to unit Euclidean length.
Tensor l2_normalize(const Tensor& x, double eps = 1e-12);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);
// y = W x + b for a vector x, or row-wise for an N x in matrix.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// x: Cin x H x W, weight: Cout x Cin x K x K, bias: Cout (may be undefined).
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t stride = 1, std::size_t pad = 0);
Tensor upsample_nearest2x(const Tensor& x);
// 2x2 area average (C x H x W with even H and W).
Tensor avg_pool2x(const Tensor& x);
Tensor global_avg_pool(const Tensor& x);

// exp(x / t) normalized along `axis`, computed with max subtraction.
Tensor softmax(const Tensor& x, std::size_t axis, double temperature = 1.0);

inline constexpr double kStatEpsilon = 1e-5;

// Per-channel spatial mean and sqrt(population variance + eps) of C x H x W.
std::pair<Tensor, Tensor> channel_stats(const Tensor& feature,
                                        double eps = kStatEpsilon);

}  // namespace talkface::ops

namespace talkface {

inline Tensor operator+(const Tensor& a, const Tensor& b) { return ops::add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return ops::sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return ops::mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return ops::div(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return ops::add_scalar(a, c); }
inline Tensor operator+(double c, const Tensor& a) { return ops::add_scalar(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return ops::add_scalar(a, -c); }
inline Tensor operator-(double c, const Tensor& a) {
  return ops::add_scalar(ops::neg(a), c);
}
inline Tensor operator*(const Tensor& a, double c) { return ops::mul_scalar(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return ops::mul_scalar(a, c); }
inline Tensor operator/(const Tensor& a, double c) { return ops::mul_scalar(a, 1.0 / c); }
inline Tensor operator-(const Tensor& a) { return ops::neg(a); }

}  // namespace talkface
