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

#include "talkface/deformation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "talkface/error.hpp"
#include "talkface/ops.hpp"

namespace talkface {

namespace {

// softplus(x) + floor == 1 at initialization.
double identity_raw_scale() { return std::log(std::expm1(1.0 - kScaleFloor)); }

void require_vector(const char* what, const Tensor& t, std::size_t c) {
  if (!t.defined() || t.size() != c) {
    throw ShapeError(std::string("affine_warp: ") + what + " has shape " +
                     (t.defined() ? shape_to_string(t.shape()) : "[]") +
                     ", expected " + std::to_string(c) + " channels");
  }
}

}  // namespace

CoeffHeads make_coeff_heads(ParameterStore& store, std::size_t in_features,
                            std::size_t channels) {
  CoeffHeads h;
  auto zero_head = [&](const std::string& name, double bias) {
    Linear fc;
    fc.weight = store.add_constant(name + ".weight", {channels, in_features}, 0.0);
    fc.bias = store.add_constant(name + ".bias", {channels}, bias);
    return fc;
  };
  h.theta = zero_head("coeff.theta", 0.0);
  h.tx = zero_head("coeff.tx", 0.0);
  h.ty = zero_head("coeff.ty", 0.0);
  h.raw_scale = zero_head("coeff.scale", identity_raw_scale());
  return h;
}

FaceDecoder make_face_decoder(ParameterStore& store, std::size_t channels, Rng& rng) {
  FaceDecoder d;
  const std::size_t half = std::max<std::size_t>(channels / 2, 1);
  d.up1 = make_conv(store, "decoder.up1", 2 * channels, channels, 3, 1, 1, rng);
  d.up2 = make_conv(store, "decoder.up2", channels, half, 3, 1, 1, rng);
  d.out = make_conv(store, "decoder.out", half, 3, 3, 1, 1, rng, 0.5);
  return d;
}

BlendNet make_blend_net(ParameterStore& store, std::size_t hidden, Rng& rng) {
  BlendNet b;
  b.first = make_conv(store, "blend.conv1", 3, hidden, 3, 1, 1, rng);
  b.second.weight = store.add_constant("blend.conv2.weight", {3, hidden, 3, 3}, 0.0);
  b.second.bias = store.add_constant("blend.conv2.bias", {3}, 0.0);
  b.second.stride = 1;
  b.second.pad = 1;
  return b;
}

AffineCoeffSet predict_affine_coeffs(const Tensor& fused_feature, const CoeffHeads& heads) {
  if (fused_feature.rank() != 1) {
    throw ShapeError("predict_affine_coeffs: expected a feature vector, got " +
                     shape_to_string(fused_feature.shape()));
  }
  AffineCoeffSet c;
  c.theta = heads.theta(fused_feature);
  c.tx = heads.tx(fused_feature);
  c.ty = heads.ty(fused_feature);
  c.scale = ops::softplus(heads.raw_scale(fused_feature)) + kScaleFloor;
  return c;
}

AffineCoeffSet identity_coeffs(std::size_t channels) {
  AffineCoeffSet c;
  c.theta = Tensor::zeros({channels});
  c.tx = Tensor::zeros({channels});
  c.ty = Tensor::zeros({channels});
  c.scale = Tensor::full({channels}, 1.0);
  return c;
}

std::array<double, 2> affine_forward_point(double theta, double tx, double ty,
                                           double scale, double x, double y) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {scale * c * x - scale * s * y + tx, scale * s * x + scale * c * y + ty};
}

Tensor affine_warp(const Tensor& feature, const AffineCoeffSet& coeffs,
                   WarpPadding padding) {
  if (feature.rank() != 3) {
    throw ShapeError("affine_warp: expected C x H x W feature, got " +
                     shape_to_string(feature.shape()));
  }
  const std::size_t channels = feature.dim(0), height = feature.dim(1), width = feature.dim(2);
  if (height < 2 || width < 2) {
    throw ShapeError("affine_warp: spatial extent must be at least 2x2, got " +
                     shape_to_string(feature.shape()));
  }
  require_vector("theta", coeffs.theta, channels);
  require_vector("tx", coeffs.tx, channels);
  require_vector("ty", coeffs.ty, channels);
  require_vector("scale", coeffs.scale, channels);
  for (const Tensor* t : {&coeffs.theta, &coeffs.tx, &coeffs.ty, &coeffs.scale}) {
    for (double v : t->data()) {
      if (!std::isfinite(v)) throw ContractError("affine_warp: non-finite coefficient");
    }
  }
  for (double v : coeffs.scale.data()) {
    if (!(v > 0.0)) throw ContractError("affine_warp: scale must be positive");
  }

  const double half_w = 0.5 * static_cast<double>(width - 1);
  const double half_h = 0.5 * static_cast<double>(height - 1);
  const bool border = padding == WarpPadding::kBorder;
  const std::size_t plane = height * width;

  // Per output cell: source position in pixels and in normalized units.
  struct Sample {
    double px, py, nx, ny;
  };
  std::vector<Sample> samples(channels * plane);
  for (std::size_t c = 0; c < channels; ++c) {
    const double theta = coeffs.theta.data()[c];
    const double cs = std::cos(theta), sn = std::sin(theta);
    const double inv_s = 1.0 / coeffs.scale.data()[c];
    const double tx = coeffs.tx.data()[c], ty = coeffs.ty.data()[c];
    for (std::size_t i = 0; i < height; ++i) {
      const double yh = static_cast<double>(i) / half_h - 1.0 - ty;
      for (std::size_t j = 0; j < width; ++j) {
        const double xh = static_cast<double>(j) / half_w - 1.0 - tx;
        const double nx = (cs * xh + sn * yh) * inv_s;
        const double ny = (-sn * xh + cs * yh) * inv_s;
        samples[c * plane + i * width + j] = {(nx + 1.0) * half_w, (ny + 1.0) * half_h, nx, ny};
      }
    }
  }

  // Bilinear taps for one sample. In border mode the position is clamped
  // onto the grid and the clamped axis carries no coordinate gradient.
  struct Taps {
    long x0, x1, y0, y1;
    double fx, fy;
    bool x_active, y_active;
  };
  auto taps_for = [=](double px, double py) {
    Taps t{};
    t.x_active = t.y_active = true;
    if (border) {
      const double max_x = static_cast<double>(width - 1), max_y = static_cast<double>(height - 1);
      if (px < 0.0 || px > max_x) t.x_active = false;
      if (py < 0.0 || py > max_y) t.y_active = false;
      px = std::clamp(px, 0.0, max_x);
      py = std::clamp(py, 0.0, max_y);
      t.x0 = std::min(static_cast<long>(std::floor(px)), static_cast<long>(width) - 1);
      t.y0 = std::min(static_cast<long>(std::floor(py)), static_cast<long>(height) - 1);
      t.x1 = std::min(t.x0 + 1, static_cast<long>(width) - 1);
      t.y1 = std::min(t.y0 + 1, static_cast<long>(height) - 1);
    } else {
      t.x0 = static_cast<long>(std::floor(px));
      t.y0 = static_cast<long>(std::floor(py));
      t.x1 = t.x0 + 1;
      t.y1 = t.y0 + 1;
    }
    t.fx = px - static_cast<double>(t.x0);
    t.fy = py - static_cast<double>(t.y0);
    return t;
  };
  auto inside = [=](long y, long x) {
    return y >= 0 && x >= 0 && y < static_cast<long>(height) && x < static_cast<long>(width);
  };

  const auto in = feature.data();
  std::vector<double> out(channels * plane);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = in.data() + c * plane;
    auto fetch = [&](long y, long x) {
      return inside(y, x) ? src[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] : 0.0;
    };
    for (std::size_t k = 0; k < plane; ++k) {
      const auto& s = samples[c * plane + k];
      const Taps t = taps_for(s.px, s.py);
      out[c * plane + k] = (1.0 - t.fy) * ((1.0 - t.fx) * fetch(t.y0, t.x0) + t.fx * fetch(t.y0, t.x1)) +
                           t.fy * ((1.0 - t.fx) * fetch(t.y1, t.x0) + t.fx * fetch(t.y1, t.x1));
    }
  }

  detail::Node* fn = feature.node().get();
  detail::Node* theta_n = coeffs.theta.node().get();
  detail::Node* tx_n = coeffs.tx.node().get();
  detail::Node* ty_n = coeffs.ty.node().get();
  detail::Node* scale_n = coeffs.scale.node().get();
  return make_result(
      "affine_warp", feature.shape(), std::move(out),
      {feature, coeffs.theta, coeffs.tx, coeffs.ty, coeffs.scale},
      [=, samples = std::move(samples)](detail::Node& self) {
        const bool coeff_grad = theta_n->requires_grad || tx_n->requires_grad ||
                                ty_n->requires_grad || scale_n->requires_grad;
        for (std::size_t c = 0; c < channels; ++c) {
          const double* src = fn->value.data() + c * plane;
          auto fetch = [&](long y, long x) {
            return inside(y, x) ? src[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] : 0.0;
          };
          const double theta = theta_n->value[c];
          const double cs = std::cos(theta), sn = std::sin(theta);
          const double scale = scale_n->value[c];
          double g_theta = 0.0, g_tx = 0.0, g_ty = 0.0, g_scale = 0.0;
          for (std::size_t k = 0; k < plane; ++k) {
            const double g = self.grad[c * plane + k];
            if (g == 0.0) continue;
            const auto& s = samples[c * plane + k];
            const Taps t = taps_for(s.px, s.py);
            const double w00 = (1.0 - t.fy) * (1.0 - t.fx), w01 = (1.0 - t.fy) * t.fx;
            const double w10 = t.fy * (1.0 - t.fx), w11 = t.fy * t.fx;
            if (fn->requires_grad) {
              auto& gf = fn->ensure_grad();
              double* dst = gf.data() + c * plane;
              auto scatter = [&](long y, long x, double w) {
                if (inside(y, x)) dst[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] += g * w;
              };
              scatter(t.y0, t.x0, w00);
              scatter(t.y0, t.x1, w01);
              scatter(t.y1, t.x0, w10);
              scatter(t.y1, t.x1, w11);
            }
            if (!coeff_grad) continue;
            const double v00 = fetch(t.y0, t.x0), v01 = fetch(t.y0, t.x1);
            const double v10 = fetch(t.y1, t.x0), v11 = fetch(t.y1, t.x1);
            // Derivatives of the sampled value w.r.t. normalized source x, y.
            const double dvx = t.x_active
                                   ? ((1.0 - t.fy) * (v01 - v00) + t.fy * (v11 - v10)) * half_w
                                   : 0.0;
            const double dvy = t.y_active
                                   ? ((1.0 - t.fx) * (v10 - v00) + t.fx * (v11 - v01)) * half_h
                                   : 0.0;
            g_theta += g * (dvx * s.ny - dvy * s.nx);
            g_scale += g * (-(dvx * s.nx + dvy * s.ny) / scale);
            g_tx += g * ((-cs * dvx + sn * dvy) / scale);
            g_ty += g * ((-sn * dvx - cs * dvy) / scale);
          }
          if (theta_n->requires_grad) theta_n->ensure_grad()[c] += g_theta;
          if (tx_n->requires_grad) tx_n->ensure_grad()[c] += g_tx;
          if (ty_n->requires_grad) ty_n->ensure_grad()[c] += g_ty;
          if (scale_n->requires_grad) scale_n->ensure_grad()[c] += g_scale;
        }
      });
}

MaskPyramid build_mask_pyramid(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || height % 4 != 0 || width % 4 != 0) {
    throw ContractError("build_mask_pyramid: extents " + std::to_string(height) + "x" +
                        std::to_string(width) + " must be positive multiples of 4");
  }
  std::vector<double> full(height * width);
  const double ramp_start = static_cast<double>(height / 2) - 2.0;
  for (std::size_t r = 0; r < height; ++r) {
    const double v = std::clamp((static_cast<double>(r) - ramp_start) / 3.0, 0.0, 1.0);
    std::fill_n(full.begin() + static_cast<long>(r * width), width, v);
  }
  MaskPyramid pyramid;
  pyramid.levels.push_back(Tensor::from({1, height, width}, std::move(full)));
  for (int k = 0; k < 2; ++k) {
    pyramid.levels.push_back(ops::avg_pool2x(pyramid.levels.back()).detach());
  }
  return pyramid;
}

Tensor decode_face(const Tensor& source_feature, const Tensor& deformed_feature,
                   const FaceDecoder& decoder) {
  if (source_feature.shape() != deformed_feature.shape()) {
    throw ShapeError("decode_face: feature shapes differ, " +
                     shape_to_string(source_feature.shape()) + " vs " +
                     shape_to_string(deformed_feature.shape()));
  }
  Tensor x = ops::concat({source_feature, deformed_feature}, 0);
  x = ops::leaky_relu(decoder.up1(ops::upsample_nearest2x(x)));
  x = ops::leaky_relu(decoder.up2(ops::upsample_nearest2x(x)));
  return ops::sigmoid(decoder.out(x));
}

Tensor gaussian_face_mask(std::size_t height, std::size_t width, const FaceBox& box,
                          double sigma) {
  if (box.top >= box.bottom || box.left >= box.right) {
    throw ContractError("gaussian_face_mask: empty face box");
  }
  if (box.bottom > height || box.right > width) {
    throw ContractError("gaussian_face_mask: face box exceeds the frame");
  }
  if (!(sigma > 0.0)) throw ContractError("gaussian_face_mask: sigma must be positive");

  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  std::vector<double> binary(height * width, 0.0);
  for (std::size_t r = box.top; r < box.bottom; ++r) {
    for (std::size_t c = box.left; c < box.right; ++c) binary[r * width + c] = 1.0;
  }
  // Separable blur with zero padding outside the frame.
  std::vector<double> rows(height * width, 0.0), out(height * width, 0.0);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      double acc = 0.0;
      for (long k = -radius; k <= radius; ++k) {
        const long cc = static_cast<long>(c) + k;
        if (cc >= 0 && cc < static_cast<long>(width)) {
          acc += kernel[static_cast<std::size_t>(k + radius)] * binary[r * width + static_cast<std::size_t>(cc)];
        }
      }
      rows[r * width + c] = acc;
    }
  }
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      double acc = 0.0;
      for (long k = -radius; k <= radius; ++k) {
        const long rr = static_cast<long>(r) + k;
        if (rr >= 0 && rr < static_cast<long>(height)) {
          acc += kernel[static_cast<std::size_t>(k + radius)] * rows[static_cast<std::size_t>(rr) * width + c];
        }
      }
      out[r * width + c] = std::clamp(acc, 0.0, 1.0);
    }
  }
  return Tensor::from({1, height, width}, std::move(out));
}

BlendOutput composite_and_blend(const BlendInputs& inputs, const BlendNet& net) {
  const Shape& s = inputs.generated.shape();
  if (s.size() != 3 || s[0] != 3 || inputs.source.shape() != s ||
      inputs.mask.shape() != Shape{1, s[1], s[2]}) {
    throw ShapeError("composite_and_blend: generated " + shape_to_string(s) + ", source " +
                     shape_to_string(inputs.source.shape()) + ", mask " +
                     shape_to_string(inputs.mask.shape()) + " are inconsistent");
  }
  BlendOutput out;
  out.composite = inputs.mask * inputs.generated + (1.0 - inputs.mask) * inputs.source;
  const Tensor residual =
      kBlendResidualCap * ops::tanh(net.second(ops::leaky_relu(net.first(out.composite))));
  out.final_frame = ops::clamp(out.composite + residual, 0.0, 1.0);
  return out;
}

}  // namespace talkface
