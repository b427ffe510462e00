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

#include "talkface/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "talkface/error.hpp"

namespace talkface::ops {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

using detail::Node;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " +
                   shape_to_string(a) + " and " + shape_to_string(b));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a,
                             const std::string& why) {
  throw ShapeError(std::string(op) + ": shape " + shape_to_string(a) + " " +
                   why);
}

Node* raw(const Tensor& t) { return t.node().get(); }

template <class F, class D>
Tensor unary(const char* op, const Tensor& x, F f, D derivative) {
  const auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
  Node* xn = raw(x);
  return make_result(op, x.shape(), std::move(out), {x},
                     [xn, derivative](Node& self) {
                       auto& g = xn->ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] += self.grad[i] *
                                 derivative(xn->value[i], self.value[i]);
                       }
                     });
}

// Right-aligned broadcast; returns output shape and per-element source
// offsets for each operand (empty when the operand already has that shape).
struct Broadcast {
  Shape shape;
  std::vector<std::size_t> index_a;
  std::vector<std::size_t> index_b;
};

std::vector<std::size_t> broadcast_index(const Shape& from, const Shape& to) {
  const std::size_t rank = to.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t k = 0; k < from.size(); ++k) {
    const std::size_t axis_from = from.size() - 1 - k;
    const std::size_t axis_to = rank - 1 - k;
    stride[axis_to] = from[axis_from] == 1 ? 0 : s;
    s *= from[axis_from];
  }
  const std::size_t n = shape_size(to);
  std::vector<std::size_t> index(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    index[i] = offset;
    for (std::size_t axis = rank; axis-- > 0;) {
      ++counter[axis];
      offset += stride[axis];
      if (counter[axis] < to[axis]) break;
      offset -= stride[axis] * counter[axis];
      counter[axis] = 0;
    }
  }
  return index;
}

Broadcast broadcast(const char* op, const Shape& a, const Shape& b) {
  Broadcast out;
  if (a == b) {
    out.shape = a;
    return out;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  out.shape.assign(rank, 1);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t ea = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t eb = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (ea != eb && ea != 1 && eb != 1) shape_fail(op, a, b);
    out.shape[rank - 1 - k] = std::max(ea, eb);
  }
  if (a != out.shape) out.index_a = broadcast_index(a, out.shape);
  if (b != out.shape) out.index_b = broadcast_index(b, out.shape);
  return out;
}

// f(a, b) -> value; da(a, b, y) and db(a, b, y) -> partial derivatives.
template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA da,
              DB db) {
  auto bc = broadcast(op, a.shape(), b.shape());
  const std::size_t n = shape_size(bc.shape);
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(n);
  auto ia = [&bc](std::size_t i) { return bc.index_a.empty() ? i : bc.index_a[i]; };
  auto ib = [&bc](std::size_t i) { return bc.index_b.empty() ? i : bc.index_b[i]; };
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[ia(i)], bv[ib(i)]);
  Node* an = raw(a);
  Node* bn = raw(b);
  return make_result(
      op, bc.shape, std::move(out), {a, b},
      [an, bn, index_a = std::move(bc.index_a), index_b = std::move(bc.index_b),
       da, db](Node& self) {
        const std::size_t count = self.value.size();
        auto map_a = [&](std::size_t i) { return index_a.empty() ? i : index_a[i]; };
        auto map_b = [&](std::size_t i) { return index_b.empty() ? i : index_b[i]; };
        if (an->requires_grad) {
          auto& g = an->ensure_grad();
          for (std::size_t i = 0; i < count; ++i) {
            const std::size_t ja = map_a(i);
            g[ja] += self.grad[i] *
                     da(an->value[ja], bn->value[map_b(i)], self.value[i]);
          }
        }
        if (bn->requires_grad) {
          auto& g = bn->ensure_grad();
          for (std::size_t i = 0; i < count; ++i) {
            const std::size_t jb = map_b(i);
            g[jb] += self.grad[i] *
                     db(an->value[map_a(i)], bn->value[jb], self.value[i]);
          }
        }
      });
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    shape_fail(op, shape, "has no axis " + std::to_string(axis));
  }
  AxisSplit s;
  for (std::size_t k = 0; k < axis; ++k) s.outer *= shape[k];
  s.extent = shape[axis];
  for (std::size_t k = axis + 1; k < shape.size(); ++k) s.inner *= shape[k];
  return s;
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    shape_fail(op, x.shape(), "must have rank " + std::to_string(rank));
  }
}

void im2col(const double* x, std::size_t channels, std::size_t height,
            std::size_t width, std::size_t kernel, std::size_t stride,
            std::size_t pad, std::size_t out_h, std::size_t out_w,
            double* cols) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < kernel; ++ky) {
      for (std::size_t kx = 0; kx < kernel; ++kx) {
        double* row = cols + ((c * kernel + ky) * kernel + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          double* dst = row + oy * out_w;
          if (iy < 0 || iy >= static_cast<long>(height)) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          const double* src = x + (c * height + static_cast<std::size_t>(iy)) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(width))
                          ? 0.0
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

void col2im(const double* cols, std::size_t channels, std::size_t height,
            std::size_t width, std::size_t kernel, std::size_t stride,
            std::size_t pad, std::size_t out_h, std::size_t out_w, double* x) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < kernel; ++ky) {
      for (std::size_t kx = 0; kx < kernel; ++kx) {
        const double* row = cols + ((c * kernel + ky) * kernel + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(height)) continue;
          double* dst = x + (c * height + static_cast<std::size_t>(iy)) * width;
          const double* src = row + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            if (ix >= 0 && ix < static_cast<long>(width)) {
              dst[static_cast<std::size_t>(ix)] += src[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary(
      "add_scalar", x, [c](double v) { return v + c; },
      [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double c) {
  return unary(
      "mul_scalar", x, [c](double v) { return v * c; },
      [c](double, double) { return c; });
}

Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0); }

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      "leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      "softplus", x,
      [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
}

Tensor sin(const Tensor& x) {
  return unary(
      "sin", x, [](double v) { return std::sin(v); },
      [](double v, double) { return std::cos(v); });
}

Tensor cos(const Tensor& x) {
  return unary(
      "cos", x, [](double v) { return std::cos(v); },
      [](double v, double) { return -std::sin(v); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lower bound exceeds upper bound");
  return unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    shape_fail("reshape", x.shape(), "cannot become " + shape_to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  Node* xn = raw(x);
  return make_result("reshape", std::move(shape), std::move(out), {x},
                     [xn](Node& self) {
                       auto& g = xn->ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                     });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) shape_fail("concat", first, "has no axis " + std::to_string(axis));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_fail("concat", first, s);
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (k != axis && s[k] != first[k]) shape_fail("concat", first, s);
    }
    out_shape[axis] += s[axis];
  }
  const auto split = split_axis("concat", out_shape, axis);
  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.dim(axis) * split.inner;
    const auto v = p.data();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(v.begin() + o * chunk, chunk,
                  out.begin() + o * split.extent * split.inner + offset);
    }
    offset += chunk;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  std::vector<Node*> nodes;
  for (const auto& p : parts) nodes.push_back(raw(p));
  return make_result(
      "concat", out_shape, std::move(out), inputs,
      [nodes, offsets, split, axis](Node& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          Node* n = nodes[k];
          if (!n->requires_grad) continue;
          auto& g = n->ensure_grad();
          const std::size_t chunk = n->shape[axis] * split.inner;
          for (std::size_t o = 0; o < split.outer; ++o) {
            const double* src =
                self.grad.data() + o * split.extent * split.inner + offsets[k];
            double* dst = g.data() + o * chunk;
            for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
          }
        }
      });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor stack_rows(std::span<const Tensor> rows) {
  std::vector<Tensor> reshaped;
  reshaped.reserve(rows.size());
  for (const auto& r : rows) reshaped.push_back(reshape(r, {1, r.size()}));
  return concat(reshaped, 0);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
  const auto split = split_axis("slice", x.shape(), axis);
  if (begin >= end || end > split.extent) {
    shape_fail("slice", x.shape(),
               "cannot be sliced to [" + std::to_string(begin) + ", " +
                   std::to_string(end) + ") on axis " + std::to_string(axis));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * split.inner;
  std::vector<double> out(shape_size(out_shape));
  const auto v = x.data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(v.begin() + (o * split.extent + begin) * split.inner, chunk,
                out.begin() + o * chunk);
  }
  Node* xn = raw(x);
  return make_result("slice", out_shape, std::move(out), {x},
                     [xn, split, begin, chunk](Node& self) {
                       auto& g = xn->ensure_grad();
                       for (std::size_t o = 0; o < split.outer; ++o) {
                         double* dst = g.data() + (o * split.extent + begin) * split.inner;
                         const double* src = self.grad.data() + o * chunk;
                         for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                       }
                     });
}

Tensor diagonal(const Tensor& m) {
  require_rank("diagonal", m, 2);
  const std::size_t n = m.dim(0);
  if (m.dim(1) != n) shape_fail("diagonal", m.shape(), "is not square");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = m.data()[i * n + i];
  Node* mn = raw(m);
  return make_result("diagonal", {n}, std::move(out), {m}, [mn, n](Node& self) {
    auto& g = mn->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) g[i * n + i] += self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Node* xn = raw(x);
  return make_result("sum", {1}, {total}, {x}, [xn](Node& self) {
    auto& g = xn->ensure_grad();
    for (double& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return mul_scalar(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sum(const Tensor& x, std::size_t axis, bool keepdim) {
  const auto split = split_axis("sum", x.shape(), axis);
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<long>(axis));
    if (out_shape.empty()) out_shape.push_back(1);
  }
  std::vector<double> out(split.outer * split.inner, 0.0);
  const auto v = x.data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t e = 0; e < split.extent; ++e) {
      const double* src = v.data() + (o * split.extent + e) * split.inner;
      double* dst = out.data() + o * split.inner;
      for (std::size_t i = 0; i < split.inner; ++i) dst[i] += src[i];
    }
  }
  Node* xn = raw(x);
  return make_result("sum_axis", out_shape, std::move(out), {x},
                     [xn, split](Node& self) {
                       auto& g = xn->ensure_grad();
                       for (std::size_t o = 0; o < split.outer; ++o) {
                         for (std::size_t e = 0; e < split.extent; ++e) {
                           double* dst = g.data() + (o * split.extent + e) * split.inner;
                           const double* src = self.grad.data() + o * split.inner;
                           for (std::size_t i = 0; i < split.inner; ++i) dst[i] += src[i];
                         }
                       }
                     });
}

Tensor mean(const Tensor& x, std::size_t axis, bool keepdim) {
  const double extent = static_cast<double>(x.dim(axis));
  return mul_scalar(sum(x, axis, keepdim), 1.0 / extent);
}

Tensor variance(const Tensor& x, std::size_t axis, bool keepdim) {
  const Tensor centered = sub(x, mean(x, axis, true));
  return mean(square(centered), axis, keepdim);
}

Tensor l1_norm(const Tensor& x) { return sum(abs(x)); }

Tensor l2_norm(const Tensor& x) { return sqrt(sum(square(x))); }

Tensor l2_normalize(const Tensor& x, double eps) {
  if (x.rank() == 1) return div(x, sqrt(add_scalar(sum(square(x)), eps)));
  require_rank("l2_normalize", x, 2);
  return div(x, sqrt(add_scalar(sum(square(x), 1, true), eps)));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) shape_fail("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n);
  MatMap(out.data(), m, n).noalias() =
      ConstMatMap(a.data().data(), m, k) * ConstMatMap(b.data().data(), k, n);
  Node* an = raw(a);
  Node* bn = raw(b);
  return make_result("matmul", {m, n}, std::move(out), {a, b},
                     [an, bn, m, k, n](Node& self) {
                       ConstMatMap g(self.grad.data(), m, n);
                       if (an->requires_grad) {
                         MatMap(an->ensure_grad().data(), m, k).noalias() +=
                             g * ConstMatMap(bn->value.data(), k, n).transpose();
                       }
                       if (bn->requires_grad) {
                         MatMap(bn->ensure_grad().data(), k, n).noalias() +=
                             ConstMatMap(an->value.data(), m, k).transpose() * g;
                       }
                     });
}

Tensor transpose(const Tensor& m) {
  require_rank("transpose", m, 2);
  const std::size_t r = m.dim(0), c = m.dim(1);
  std::vector<double> out(r * c);
  MatMap(out.data(), c, r) = ConstMatMap(m.data().data(), r, c).transpose();
  Node* mn = raw(m);
  return make_result("transpose", {c, r}, std::move(out), {m},
                     [mn, r, c](Node& self) {
                       MatMap(mn->ensure_grad().data(), r, c) +=
                           ConstMatMap(self.grad.data(), c, r).transpose();
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", weight, 2);
  const std::size_t out_dim = weight.dim(0), in_dim = weight.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    shape_fail("linear", weight.shape(), bias.shape());
  }
  const bool vector_input = x.rank() == 1;
  if (!vector_input) require_rank("linear", x, 2);
  const std::size_t rows = vector_input ? 1 : x.dim(0);
  const std::size_t cols = vector_input ? x.dim(0) : x.dim(1);
  if (cols != in_dim) shape_fail("linear", x.shape(), weight.shape());

  std::vector<double> out(rows * out_dim);
  MatMap y(out.data(), rows, out_dim);
  y.noalias() = ConstMatMap(x.data().data(), rows, in_dim) *
                ConstMatMap(weight.data().data(), out_dim, in_dim).transpose();
  if (bias.defined()) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < out_dim; ++o) out[r * out_dim + o] += bias.data()[o];
    }
  }
  Shape out_shape = vector_input ? Shape{out_dim} : Shape{rows, out_dim};
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  Node* xn = raw(x);
  Node* wn = raw(weight);
  Node* bn = bias.defined() ? raw(bias) : nullptr;
  return make_result(
      "linear", out_shape, std::move(out), inputs,
      [xn, wn, bn, rows, in_dim, out_dim](Node& self) {
        ConstMatMap g(self.grad.data(), rows, out_dim);
        if (xn->requires_grad) {
          MatMap(xn->ensure_grad().data(), rows, in_dim).noalias() +=
              g * ConstMatMap(wn->value.data(), out_dim, in_dim);
        }
        if (wn->requires_grad) {
          MatMap(wn->ensure_grad().data(), out_dim, in_dim).noalias() +=
              g.transpose() * ConstMatMap(xn->value.data(), rows, in_dim);
        }
        if (bn && bn->requires_grad) {
          auto& gb = bn->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t o = 0; o < out_dim; ++o) gb[o] += self.grad[r * out_dim + o];
          }
        }
      });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t pad) {
  require_rank("conv2d", x, 3);
  require_rank("conv2d", weight, 4);
  const std::size_t cin = x.dim(0), height = x.dim(1), width = x.dim(2);
  const std::size_t cout = weight.dim(0), kernel = weight.dim(2);
  if (weight.dim(1) != cin || weight.dim(3) != kernel) {
    shape_fail("conv2d", x.shape(), weight.shape());
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    shape_fail("conv2d", weight.shape(), bias.shape());
  }
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  if (height + 2 * pad < kernel || width + 2 * pad < kernel) {
    shape_fail("conv2d", x.shape(), weight.shape());
  }
  const std::size_t out_h = (height + 2 * pad - kernel) / stride + 1;
  const std::size_t out_w = (width + 2 * pad - kernel) / stride + 1;
  const std::size_t patch = cin * kernel * kernel;
  const std::size_t plane = out_h * out_w;

  std::vector<double> cols(patch * plane);
  im2col(x.data().data(), cin, height, width, kernel, stride, pad, out_h, out_w,
         cols.data());
  std::vector<double> out(cout * plane);
  MatMap y(out.data(), cout, plane);
  y.noalias() = ConstMatMap(weight.data().data(), cout, patch) *
                ConstMatMap(cols.data(), patch, plane);
  if (bias.defined()) {
    for (std::size_t c = 0; c < cout; ++c) y.row(c).array() += bias.data()[c];
  }

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  Node* xn = raw(x);
  Node* wn = raw(weight);
  Node* bn = bias.defined() ? raw(bias) : nullptr;
  return make_result(
      "conv2d", {cout, out_h, out_w}, std::move(out), inputs,
      [=](Node& self) {
        ConstMatMap g(self.grad.data(), cout, plane);
        if (wn->requires_grad) {
          std::vector<double> cols_again(patch * plane);
          im2col(xn->value.data(), cin, height, width, kernel, stride, pad,
                 out_h, out_w, cols_again.data());
          MatMap(wn->ensure_grad().data(), cout, patch).noalias() +=
              g * ConstMatMap(cols_again.data(), patch, plane).transpose();
        }
        if (xn->requires_grad) {
          std::vector<double> dcols(patch * plane);
          MatMap(dcols.data(), patch, plane).noalias() =
              ConstMatMap(wn->value.data(), cout, patch).transpose() * g;
          col2im(dcols.data(), cin, height, width, kernel, stride, pad, out_h,
                 out_w, xn->ensure_grad().data());
        }
        if (bn && bn->requires_grad) {
          auto& gb = bn->ensure_grad();
          for (std::size_t c = 0; c < cout; ++c) gb[c] += g.row(c).sum();
        }
      });
}

Tensor upsample_nearest2x(const Tensor& x) {
  require_rank("upsample_nearest2x", x, 3);
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> out(c * 4 * h * w);
  const auto v = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t xx = 0; xx < 2 * w; ++xx) {
        out[(ch * 2 * h + y) * 2 * w + xx] = v[(ch * h + y / 2) * w + xx / 2];
      }
    }
  }
  Node* xn = raw(x);
  return make_result("upsample_nearest2x", {c, 2 * h, 2 * w}, std::move(out), {x},
                     [xn, c, h, w](Node& self) {
                       auto& g = xn->ensure_grad();
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         for (std::size_t y = 0; y < 2 * h; ++y) {
                           for (std::size_t xx = 0; xx < 2 * w; ++xx) {
                             g[(ch * h + y / 2) * w + xx / 2] +=
                                 self.grad[(ch * 2 * h + y) * 2 * w + xx];
                           }
                         }
                       }
                     });
}

Tensor avg_pool2x(const Tensor& x) {
  require_rank("avg_pool2x", x, 3);
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) shape_fail("avg_pool2x", x.shape(), "has odd spatial extent");
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<double> out(c * oh * ow);
  const auto v = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const double* base = v.data() + (ch * h + 2 * y) * w + 2 * xx;
        out[(ch * oh + y) * ow + xx] = 0.25 * (base[0] + base[1] + base[w] + base[w + 1]);
      }
    }
  }
  Node* xn = raw(x);
  return make_result("avg_pool2x", {c, oh, ow}, std::move(out), {x},
                     [xn, c, h, w, oh, ow](Node& self) {
                       auto& g = xn->ensure_grad();
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         for (std::size_t y = 0; y < oh; ++y) {
                           for (std::size_t xx = 0; xx < ow; ++xx) {
                             const double d = 0.25 * self.grad[(ch * oh + y) * ow + xx];
                             double* base = g.data() + (ch * h + 2 * y) * w + 2 * xx;
                             base[0] += d;
                             base[1] += d;
                             base[w] += d;
                             base[w + 1] += d;
                           }
                         }
                       }
                     });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank("global_avg_pool", x, 3);
  return mean(reshape(x, {x.dim(0), x.dim(1) * x.dim(2)}), 1);
}

Tensor softmax(const Tensor& x, std::size_t axis, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ContractError("softmax: temperature must be positive, got " +
                        std::to_string(temperature));
  }
  const auto split = split_axis("softmax", x.shape(), axis);
  const auto v = x.data();
  std::vector<double> out(v.size());
  const double inv_t = 1.0 / temperature;
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t i = 0; i < split.inner; ++i) {
      const std::size_t base = o * split.extent * split.inner + i;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < split.extent; ++e) {
        peak = std::max(peak, v[base + e * split.inner] * inv_t);
      }
      double total = 0.0;
      for (std::size_t e = 0; e < split.extent; ++e) {
        const double z = std::exp(v[base + e * split.inner] * inv_t - peak);
        out[base + e * split.inner] = z;
        total += z;
      }
      for (std::size_t e = 0; e < split.extent; ++e) out[base + e * split.inner] /= total;
    }
  }
  Node* xn = raw(x);
  return make_result("softmax", x.shape(), std::move(out), {x},
                     [xn, split, inv_t](Node& self) {
                       auto& g = xn->ensure_grad();
                       for (std::size_t o = 0; o < split.outer; ++o) {
                         for (std::size_t i = 0; i < split.inner; ++i) {
                           const std::size_t base = o * split.extent * split.inner + i;
                           double dot = 0.0;
                           for (std::size_t e = 0; e < split.extent; ++e) {
                             const std::size_t k = base + e * split.inner;
                             dot += self.grad[k] * self.value[k];
                           }
                           for (std::size_t e = 0; e < split.extent; ++e) {
                             const std::size_t k = base + e * split.inner;
                             g[k] += inv_t * self.value[k] * (self.grad[k] - dot);
                           }
                         }
                       }
                     });
}

std::pair<Tensor, Tensor> channel_stats(const Tensor& feature, double eps) {
  require_rank("channel_stats", feature, 3);
  const Tensor flat =
      reshape(feature, {feature.dim(0), feature.dim(1) * feature.dim(2)});
  Tensor mu = mean(flat, 1);
  Tensor sigma = sqrt(add_scalar(variance(flat, 1), eps));
  return {mu, sigma};
}

}  // namespace talkface::ops
