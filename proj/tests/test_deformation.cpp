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

#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "talkface/deformation.hpp"
#include "talkface/error.hpp"
#include "talkface/gradcheck.hpp"
#include "talkface/ops.hpp"
#include "test_util.hpp"

using namespace talkface;
using talkface::testing::max_abs_diff;
using talkface::testing::random_readout;
using talkface::testing::random_tensor;

namespace {

AffineCoeffSet coeffs_of(std::vector<double> theta, std::vector<double> tx,
                         std::vector<double> ty, std::vector<double> scale,
                         bool requires_grad = false) {
  const std::size_t c = theta.size();
  return {Tensor::from({c}, std::move(theta), requires_grad),
          Tensor::from({c}, std::move(tx), requires_grad),
          Tensor::from({c}, std::move(ty), requires_grad),
          Tensor::from({c}, std::move(scale), requires_grad)};
}

// Brute-force resampler: for each output pixel, invert the similarity map on
// the normalized grid and interpolate from the four clamped neighbours.
double brute_sample(const Tensor& f, std::size_t c, double theta, double tx, double ty,
                    double s, std::size_t i, std::size_t j) {
  const double h = double(f.dim(1)), w = double(f.dim(2));
  const double xh = -1.0 + 2.0 * double(j) / (w - 1.0) - tx;
  const double yh = -1.0 + 2.0 * double(i) / (h - 1.0) - ty;
  const double x = (std::cos(theta) * xh + std::sin(theta) * yh) / s;
  const double y = (-std::sin(theta) * xh + std::cos(theta) * yh) / s;
  const double px = std::clamp((x + 1.0) * (w - 1.0) / 2.0, 0.0, w - 1.0);
  const double py = std::clamp((y + 1.0) * (h - 1.0) / 2.0, 0.0, h - 1.0);
  auto at = [&](double yy, double xx) {
    return f.at({c, std::size_t(std::clamp(yy, 0.0, h - 1.0)),
                 std::size_t(std::clamp(xx, 0.0, w - 1.0))});
  };
  const double x0 = std::floor(px), y0 = std::floor(py);
  const double ax = px - x0, ay = py - y0;
  return (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
         ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
}

}  // namespace

TEST_CASE("fresh coefficient heads predict the identity transform") {
  ParameterStore store;
  const CoeffHeads heads = make_coeff_heads(store, 12, 32);
  Rng rng(1);
  const AffineCoeffSet c = predict_affine_coeffs(random_tensor({12}, rng, -3, 3, false), heads);
  for (const Tensor* t : {&c.theta, &c.tx, &c.ty, &c.scale}) CHECK(t->size() == 32);
  for (std::size_t k = 0; k < 32; ++k) {
    CHECK(std::abs(c.theta.data()[k]) < 1e-6);
    CHECK(std::abs(c.tx.data()[k]) < 1e-6);
    CHECK(std::abs(c.ty.data()[k]) < 1e-6);
    CHECK(std::abs(c.scale.data()[k] - 1.0) < 1e-6);
  }
}

TEST_CASE("predicted scale stays above the floor") {
  ParameterStore store;
  CoeffHeads heads = make_coeff_heads(store, 4, 3);
  for (double& b : heads.raw_scale.bias.mutable_data()) b = -50.0;
  const AffineCoeffSet c = predict_affine_coeffs(Tensor::zeros({4}), heads);
  for (double s : c.scale.data()) CHECK(s >= kScaleFloor);
}

TEST_CASE("coefficient heads pass grad_check") {
  ParameterStore store;
  CoeffHeads heads = make_coeff_heads(store, 5, 3);
  Rng rng(2);
  for (Tensor t : {heads.theta.weight, heads.tx.weight, heads.ty.weight, heads.raw_scale.weight}) {
    for (double& v : t.mutable_data()) v = rng.uniform(-0.5, 0.5);
  }
  Tensor f = random_tensor({5}, rng);
  auto fn = [&] {
    const AffineCoeffSet c = predict_affine_coeffs(f, heads);
    return ops::sum(c.theta * 0.3 + c.tx * -0.7 + c.ty * 1.1 + c.scale * 0.9);
  };
  auto r = grad_check(fn, {f, heads.theta.weight, heads.tx.bias, heads.ty.weight,
                           heads.raw_scale.weight, heads.raw_scale.bias});
  CHECK_MESSAGE(r.passed(1e-5), r.describe());
}

TEST_CASE("identity coefficients reproduce the feature") {
  Rng rng(3);
  for (std::size_t h : {2u, 5u, 16u}) {
    Tensor f = random_tensor({4, h, h + 3}, rng, -1, 1, false);
    const Tensor out = affine_warp(f, identity_coeffs(4));
    CHECK(max_abs_diff(out.data(), f.data()) < 1e-12);
    const Tensor outz = affine_warp(f, identity_coeffs(4), WarpPadding::kZeros);
    CHECK(max_abs_diff(outz.data(), f.data()) < 1e-12);
  }
}

TEST_CASE("quarter-turn rotation maps (1,0) to (0,1)") {
  const auto p = affine_forward_point(std::numbers::pi / 2, 0.0, 0.0, 1.0, 1.0, 0.0);
  CHECK(std::abs(p[0] - 0.0) < 1e-12);
  CHECK(std::abs(p[1] - 1.0) < 1e-12);
  const auto q = affine_forward_point(0.3, 0.2, -0.1, 1.5, 0.0, 0.0);
  CHECK(q[0] == doctest::Approx(0.2));
  CHECK(q[1] == doctest::Approx(-0.1));
}

TEST_CASE("warp output at a cell equals the input at the inverse-mapped point") {
  // Forward map the sampled source coordinate and recover the output cell.
  const std::size_t n = 9;
  std::vector<double> ramp_x(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) ramp_x[i * n + j] = -1.0 + 2.0 * double(j) / double(n - 1);
  }
  // Channel value = normalized x coordinate; bilinear reproduces it exactly.
  Tensor f = Tensor::from({1, n, n}, ramp_x);
  const double theta = 0.4, tx = 0.05, ty = -0.03, s = 1.3;
  const Tensor out = affine_warp(f, coeffs_of({theta}, {tx}, {ty}, {s}));
  for (std::size_t i = 2; i < n - 2; ++i) {
    for (std::size_t j = 2; j < n - 2; ++j) {
      const double sx = out.at({0, i, j});
      // Solve for source y analytically from the inverse and check the forward map.
      const double xh = -1.0 + 2.0 * double(j) / double(n - 1);
      const double yh = -1.0 + 2.0 * double(i) / double(n - 1);
      const double sy = (-std::sin(theta) * (xh - tx) + std::cos(theta) * (yh - ty)) / s;
      const auto p = affine_forward_point(theta, tx, ty, s, sx, sy);
      CHECK(std::abs(p[0] - xh) < 1e-12);
      CHECK(std::abs(p[1] - yh) < 1e-12);
    }
  }
}

TEST_CASE("one-pixel translation matches the integer-shift oracle") {
  const std::size_t h = 12, w = 16;
  Rng rng(4);
  Tensor f = random_tensor({2, h, w}, rng, 0, 1, false);
  const double dx = 2.0 / double(w - 1), dy = 2.0 / double(h - 1);
  const Tensor right = affine_warp(f, coeffs_of({0, 0}, {dx, dx}, {0, 0}, {1, 1}));
  const Tensor down = affine_warp(f, coeffs_of({0, 0}, {0, 0}, {dy, dy}, {1, 1}));
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 2; i < h - 2; ++i) {
      for (std::size_t j = 2; j < w - 2; ++j) {
        CHECK(std::abs(right.at({c, i, j}) - f.at({c, i, j - 1})) < 1e-9);
        CHECK(std::abs(down.at({c, i, j}) - f.at({c, i - 1, j})) < 1e-9);
      }
    }
  }
}

TEST_CASE("warp matches the brute-force resampler for general coefficients") {
  Rng rng(5);
  Tensor f = random_tensor({3, 7, 10}, rng, -1, 1, false);
  const AffineCoeffSet c = coeffs_of({0.3, -1.2, 2.0}, {0.1, -0.4, 0.0}, {0.2, 0.05, -0.3},
                                     {0.8, 1.4, 1.0});
  const Tensor out = affine_warp(f, c);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t j = 0; j < 10; ++j) {
        const double expect = brute_sample(f, ch, c.theta.data()[ch], c.tx.data()[ch],
                                           c.ty.data()[ch], c.scale.data()[ch], i, j);
        CHECK(std::abs(out.at({ch, i, j}) - expect) < 1e-12);
      }
    }
  }
}

TEST_CASE("zero padding reads zeros outside the grid") {
  Tensor f = Tensor::full({1, 6, 6}, 2.0);
  // Shrinking to half scale samples twice as far out: the rim lands outside.
  const Tensor z = affine_warp(f, coeffs_of({0}, {0}, {0}, {0.5}), WarpPadding::kZeros);
  const Tensor b = affine_warp(f, coeffs_of({0}, {0}, {0}, {0.5}), WarpPadding::kBorder);
  CHECK(z.at({0, 0, 0}) == 0.0);
  CHECK(b.at({0, 0, 0}) == 2.0);
  CHECK(z.at({0, 3, 3}) == doctest::Approx(2.0));
}

TEST_CASE("translate then translate back recovers the feature away from the border") {
  const std::size_t n = 32;
  std::vector<double> v(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      v[i * n + j] = 0.5 + 0.3 * std::sin(2 * std::numbers::pi * double(j) / 128.0) *
                               std::cos(2 * std::numbers::pi * double(i) / 128.0);
    }
  }
  Tensor f = Tensor::from({1, n, n}, v);
  for (double frac : {0.25, 0.5, 1.7}) {
    const double d = frac * 2.0 / double(n - 1);
    const Tensor there = affine_warp(f, coeffs_of({0}, {d}, {-d}, {1}));
    const Tensor back = affine_warp(there, coeffs_of({0}, {-d}, {d}, {1}));
    double worst = 0.0;
    for (std::size_t i = 2; i < n - 2; ++i) {
      for (std::size_t j = 2; j < n - 2; ++j) {
        worst = std::max(worst, std::abs(back.at({0, i, j}) - f.at({0, i, j})));
      }
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("non-finite or non-positive coefficients are rejected") {
  Tensor f = Tensor::zeros({1, 4, 4});
  CHECK_THROWS_AS(affine_warp(f, coeffs_of({NAN}, {0}, {0}, {1})), ContractError);
  CHECK_THROWS_AS(affine_warp(f, coeffs_of({0}, {INFINITY}, {0}, {1})), ContractError);
  CHECK_THROWS_AS(affine_warp(f, coeffs_of({0}, {0}, {0}, {0})), ContractError);
  CHECK_THROWS_AS(affine_warp(f, coeffs_of({0, 0}, {0, 0}, {0, 0}, {1, 1})), ShapeError);
}

TEST_CASE("warp gradients w.r.t. feature and every coefficient set") {
  for (WarpPadding pad : {WarpPadding::kBorder, WarpPadding::kZeros}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(100 + seed);
      Tensor f = random_tensor({3, 6, 7}, rng);
      // Non-integer offsets keep samples away from interpolation kinks.
      AffineCoeffSet c{random_tensor({3}, rng, -0.6, 0.6), random_tensor({3}, rng, -0.3, 0.3),
                       random_tensor({3}, rng, -0.3, 0.3), random_tensor({3}, rng, 0.7, 1.4)};
      Tensor readout = random_tensor({3, 6, 7}, rng, -1, 1, false);
      auto r = grad_check([&] { return ops::sum(affine_warp(f, c, pad) * readout); },
                          {f, c.theta, c.tx, c.ty, c.scale});
      CHECK_MESSAGE(r.passed(1e-4), r.describe());
    }
  }
}

TEST_CASE("mask pyramid for an 8x8 frame") {
  const MaskPyramid p = build_mask_pyramid(8, 8);
  REQUIRE(p.levels.size() == 3);
  CHECK(p.levels[0].shape() == Shape{1, 8, 8});
  CHECK(p.levels[1].shape() == Shape{1, 4, 4});
  CHECK(p.levels[2].shape() == Shape{1, 2, 2});
  const double rows[8] = {0, 0, 0, 1.0 / 3, 2.0 / 3, 1, 1, 1};
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(p.levels[0].at({0, r, c}) - rows[r]) < 1e-15);
  }
}

TEST_CASE("mask pyramid covers half the frame and is area-consistent") {
  for (std::size_t h : {8u, 16u, 32u, 64u}) {
    const MaskPyramid p = build_mask_pyramid(h, h + 4);
    for (const Tensor& m : p.levels) {
      double sum = 0.0;
      for (double v : m.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        sum += v;
      }
      CHECK(std::abs(sum / double(m.size()) - 0.5) <= 2.0 / double(h));
    }
    // Area average of the full mask by factor f, computed from scratch.
    for (std::size_t k = 1; k < 3; ++k) {
      const std::size_t f = std::size_t(1) << k;
      const Tensor& coarse = p.levels[k];
      for (std::size_t r = 0; r < coarse.dim(1); ++r) {
        for (std::size_t c = 0; c < coarse.dim(2); ++c) {
          double acc = 0.0;
          for (std::size_t a = 0; a < f; ++a) {
            for (std::size_t b = 0; b < f; ++b) acc += p.levels[0].at({0, r * f + a, c * f + b});
          }
          CHECK(std::abs(coarse.at({0, r, c}) - acc / double(f * f)) < 1e-6);
        }
      }
    }
  }
  CHECK_THROWS_AS(build_mask_pyramid(10, 8), ContractError);
  CHECK_THROWS_AS(build_mask_pyramid(0, 8), ContractError);
}

TEST_CASE("decoder output shape, range and gradient flow") {
  for (std::size_t h : {32u, 64u}) {
    ParameterStore store;
    Rng rng(6);
    const FaceDecoder dec = make_face_decoder(store, 8, rng);
    Tensor fs = random_tensor({8, h / 4, h / 4}, rng, -1, 1, true);
    Tensor fd = random_tensor({8, h / 4, h / 4}, rng, -1, 1, true);
    const Tensor out = decode_face(fs, fd, dec);
    CHECK(out.shape() == Shape{3, h, h});
    for (double v : out.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    auto grads = backward(random_readout(out, rng));
    double ns = 0.0, nd = 0.0;
    for (double g : grads.at(fs).data()) ns += g * g;
    for (double g : grads.at(fd).data()) nd += g * g;
    CHECK(ns > 0.0);
    CHECK(nd > 0.0);
  }
  ParameterStore store;
  Rng rng(7);
  const FaceDecoder dec = make_face_decoder(store, 4, rng);
  CHECK_THROWS_AS(decode_face(Tensor::zeros({4, 4, 4}), Tensor::zeros({4, 2, 2}), dec), ShapeError);
}

TEST_CASE("decoder passes grad_check") {
  ParameterStore store;
  Rng rng(8);
  const FaceDecoder dec = make_face_decoder(store, 2, rng);
  Tensor fs = random_tensor({2, 2, 2}, rng);
  Tensor fd = random_tensor({2, 2, 2}, rng);
  Tensor readout = random_tensor({3, 8, 8}, rng, -1, 1, false);
  auto r = grad_check([&] { return ops::sum(decode_face(fs, fd, dec) * readout); },
                      {fs, fd, dec.up1.weight, dec.out.bias});
  CHECK_MESSAGE(r.passed(1e-5), r.describe());
}

TEST_CASE("narrow gaussian mask is the binary box") {
  const FaceBox box{4, 5, 12, 11};
  const Tensor m = gaussian_face_mask(16, 16, box, 0.1);
  for (std::size_t r = 0; r < 16; ++r) {
    for (std::size_t c = 0; c < 16; ++c) {
      const double inside = (r >= 4 && r < 12 && c >= 5 && c < 11) ? 1.0 : 0.0;
      CHECK(std::abs(m.at({0, r, c}) - inside) < 1e-12);
    }
  }
}

TEST_CASE("gaussian mask conserves mass and saturates inside a large box") {
  const FaceBox box{12, 12, 40, 44};
  const Tensor m = gaussian_face_mask(64, 64, box, 2.0);
  double sum = 0.0, jump = 0.0;
  for (double v : m.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    sum += v;
  }
  CHECK(std::abs(sum - 28.0 * 32.0) < 1e-4);
  CHECK(std::abs(m.at({0, 26, 28}) - 1.0) < 1e-6);
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t c = 0; c + 1 < 64; ++c) {
      jump = std::max(jump, std::abs(m.at({0, r, c + 1}) - m.at({0, r, c})));
      jump = std::max(jump, std::abs(m.at({0, c + 1, r}) - m.at({0, c, r})));
    }
  }
  CHECK(jump <= 0.5);
  CHECK_THROWS_AS(gaussian_face_mask(16, 16, FaceBox{4, 4, 4, 8}, 1.0), ContractError);
  CHECK_THROWS_AS(gaussian_face_mask(16, 16, FaceBox{4, 4, 8, 20}, 1.0), ContractError);
  CHECK_THROWS_AS(gaussian_face_mask(16, 16, box, 0.0), ContractError);
}

TEST_CASE("untrained blend with an empty or full mask") {
  ParameterStore store;
  Rng rng(9);
  const BlendNet net = make_blend_net(store, 16, rng);
  Tensor gen = random_tensor({3, 8, 8}, rng, 0, 1, false);
  Tensor src = random_tensor({3, 8, 8}, rng, 0, 1, false);
  const BlendOutput none = composite_and_blend({gen, src, Tensor::zeros({1, 8, 8})}, net);
  const BlendOutput all = composite_and_blend({gen, src, Tensor::full({1, 8, 8}, 1.0)}, net);
  CHECK(max_abs_diff(none.final_frame.data(), src.data()) == 0.0);
  CHECK(max_abs_diff(all.final_frame.data(), gen.data()) == 0.0);
}

TEST_CASE("blend residual is bounded by the cap") {
  ParameterStore store;
  Rng rng(10);
  BlendNet net = make_blend_net(store, 16, rng);
  for (double& v : net.second.weight.mutable_data()) v = rng.uniform(-3.0, 3.0);
  Tensor gen = random_tensor({3, 8, 8}, rng, 0, 1, false);
  Tensor src = random_tensor({3, 8, 8}, rng, 0, 1, false);
  Tensor mask = random_tensor({1, 8, 8}, rng, 0, 1, false);
  const BlendOutput out = composite_and_blend({gen, src, mask}, net);
  double moved = 0.0;
  for (std::size_t k = 0; k < out.final_frame.size(); ++k) {
    const double d = std::abs(out.final_frame.data()[k] - out.composite.data()[k]);
    CHECK(d <= kBlendResidualCap + 1e-15);
    CHECK(out.final_frame.data()[k] >= 0.0);
    CHECK(out.final_frame.data()[k] <= 1.0);
    moved = std::max(moved, d);
  }
  CHECK(moved > 0.01);
  CHECK_THROWS_AS(composite_and_blend({gen, src, Tensor::zeros({1, 4, 4})}, net), ShapeError);
}

TEST_CASE("blend passes grad_check") {
  ParameterStore store;
  Rng rng(11);
  BlendNet net = make_blend_net(store, 4, rng);
  for (double& v : net.second.weight.mutable_data()) v = rng.uniform(-0.5, 0.5);
  // Values kept inside (0.2, 0.8) so the output clamp stays inactive.
  Tensor gen = random_tensor({3, 5, 5}, rng, 0.3, 0.7);
  Tensor src = random_tensor({3, 5, 5}, rng, 0.3, 0.7);
  Tensor mask = random_tensor({1, 5, 5}, rng, 0.0, 1.0);
  Tensor readout = random_tensor({3, 5, 5}, rng, -1, 1, false);
  auto r = grad_check(
      [&] { return ops::sum(composite_and_blend({gen, src, mask}, net).final_frame * readout); },
      {gen, src, mask, net.first.weight, net.second.weight, net.second.bias});
  CHECK_MESSAGE(r.passed(1e-5), r.describe());
}
