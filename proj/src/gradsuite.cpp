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

#include "talkface/gradsuite.hpp"

#include <algorithm>
#include <chrono>
#include <functional>

#include "talkface/alignment.hpp"
#include "talkface/deformation.hpp"
#include "talkface/gradcheck.hpp"
#include "talkface/losses.hpp"
#include "talkface/nn.hpp"
#include "talkface/ops.hpp"

namespace talkface {

namespace {

Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = true) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

using Fixture = std::function<GradCheckResult(Rng&)>;

struct Case {
  std::string op;
  Fixture run;
};

std::vector<Case> suite_cases() {
  std::vector<Case> cases;
  cases.push_back({"adain", [](Rng& rng) {
    ParameterStore store;
    const AdaInParams p = make_adain_params(store, "a", 5, 3, rng);
    Tensor f = uniform({3, 4, 4}, rng, -1, 1), l = uniform({5}, rng, -1, 1);
    Tensor ro = uniform({3, 4, 4}, rng, -1, 1, false);
    return grad_check([&] { return ops::sum(adain(f, l, p) * ro); },
                      {f, l, p.sigma.weight, p.sigma.bias, p.mu.weight, p.mu.bias});
  }});
  cases.push_back({"residual_adain_block", [](Rng& rng) {
    ParameterStore store;
    const ResidualAdaInBlock b = make_residual_adain_block(store, "b", 5, 3, rng);
    Tensor f = uniform({3, 4, 4}, rng, -1, 1), l = uniform({5}, rng, -1, 1);
    Tensor ro = uniform({3, 4, 4}, rng, -1, 1, false);
    return grad_check([&] { return ops::sum(residual_adain_block(f, l, b) * ro); },
                      {f, l, b.conv.weight, b.conv.bias, b.adain.sigma.weight, b.adain.mu.bias});
  }});
  cases.push_back({"score_softmax", [](Rng& rng) {
    ParameterStore store;
    const ProjectionHeads h = make_projection_heads(store, 4, 5, 3, rng);
    Tensor v = uniform({3, 4}, rng, -1, 1), a = uniform({3, 5}, rng, -1, 1);
    Tensor r1 = uniform({3, 3}, rng, -1, 1, false), r2 = uniform({3, 3}, rng, -1, 1, false);
    return grad_check(
        [&] {
          const SimilarityPair p = similarity_distributions(score_matrices(v, a, h, 0.5));
          return ops::sum(p.visual_to_audio * r1) + ops::sum(p.audio_to_visual * r2);
        },
        {v, a, h.visual.weight, h.audio.weight, h.visual_prime.weight, h.audio_prime.bias});
  }});
  // One entry per warp input so a failure names the coefficient set.
  const char* warp_names[] = {"affine_warp[feature]", "affine_warp[theta]", "affine_warp[tx]",
                              "affine_warp[ty]", "affine_warp[scale]"};
  for (std::size_t which = 0; which < 5; ++which) {
    for (WarpPadding pad : {WarpPadding::kBorder, WarpPadding::kZeros}) {
      const std::string name = std::string(warp_names[which]) +
                               (pad == WarpPadding::kBorder ? "/border" : "/zeros");
      cases.push_back({name, [which, pad](Rng& rng) {
        Tensor f = uniform({3, 6, 7}, rng, -1, 1);
        AffineCoeffSet c{uniform({3}, rng, -0.6, 0.6), uniform({3}, rng, -0.3, 0.3),
                         uniform({3}, rng, -0.3, 0.3), uniform({3}, rng, 0.7, 1.4)};
        Tensor ro = uniform({3, 6, 7}, rng, -1, 1, false);
        const Tensor inputs[] = {f, c.theta, c.tx, c.ty, c.scale};
        return grad_check([&] { return ops::sum(affine_warp(f, c, pad) * ro); },
                          {inputs[which]});
      }});
    }
  }
  cases.push_back({"facial_attribute_loss", [](Rng& rng) {
    Tensor a = uniform({6}, rng, -1, 1), b = uniform({6}, rng, -1, 1);
    return grad_check([&] { return facial_attribute_loss(a, b); }, {a, b});
  }});
  cases.push_back({"perception_loss", [](Rng& rng) {
    const RandomConvExtractor ex(rng.next());
    Tensor a = uniform({3, 8, 8}, rng, 0, 1), b = uniform({3, 8, 8}, rng, 0, 1);
    return grad_check([&] { return perception_loss(a, b, ex); }, {a, b});
  }});
  cases.push_back({"lsgan_losses", [](Rng& rng) {
    Tensor real = uniform({6}, rng, -1, 1), fake = uniform({6}, rng, -1, 1);
    return grad_check(
        [&] {
          const GanLosses g = lsgan_losses(real, fake);
          return g.discriminator + 0.7 * g.generator;
        },
        {real, fake});
  }});
  cases.push_back({"l1_reconstruction", [](Rng& rng) {
    const MaskPyramid m = build_mask_pyramid(8, 8);
    Tensor a = uniform({3, 8, 8}, rng, 0, 1), b = uniform({3, 8, 8}, rng, 0, 1);
    return grad_check([&] { return l1_reconstruction(a, b, m); }, {a, b});
  }});
  cases.push_back({"contrastive_loss", [](Rng& rng) {
    Tensor s = uniform({4, 4}, rng, -1, 1), q = uniform({4, 4}, rng, -1, 1);
    return grad_check(
        [&] { return contrastive_loss(similarity_distributions(ScorePair{s, q, 0.3})); }, {s, q});
  }});
  cases.push_back({"decode_face", [](Rng& rng) {
    ParameterStore store;
    const FaceDecoder dec = make_face_decoder(store, 4, rng);
    Tensor fs = uniform({4, 2, 2}, rng, -1, 1), fd = uniform({4, 2, 2}, rng, -1, 1);
    Tensor ro = uniform({3, 8, 8}, rng, -1, 1, false);
    return grad_check([&] { return ops::sum(decode_face(fs, fd, dec) * ro); },
                      {fs, fd, dec.up1.weight, dec.up2.bias, dec.out.weight});
  }});
  cases.push_back({"composite_and_blend", [](Rng& rng) {
    ParameterStore store;
    BlendNet net = make_blend_net(store, 4, rng);
    // Give the zero-initialized layer weights so gradients reach both convs.
    for (double& w : net.second.weight.mutable_data()) w = rng.uniform(-0.5, 0.5);
    Tensor gen = uniform({3, 6, 6}, rng, 0.2, 0.8), src = uniform({3, 6, 6}, rng, 0.2, 0.8);
    Tensor mask = uniform({1, 6, 6}, rng, 0, 1);
    Tensor ro = uniform({3, 6, 6}, rng, -1, 1, false);
    return grad_check(
        [&] {
          const BlendOutput b = composite_and_blend({gen, src, mask}, net);
          return ops::sum(b.final_frame * ro);
        },
        {gen, src, mask, net.first.weight, net.second.weight, net.second.bias});
  }});
  return cases;
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const SuiteEntry& e) { return e.passed; });
}

SuiteReport run_gradient_suite(std::size_t seeds, double tolerance) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport report;
  for (const Case& c : suite_cases()) {
    SuiteEntry e;
    e.op = c.op;
    e.passed = true;
    for (std::size_t s = 1; s <= seeds; ++s) {
      Rng rng(1000 * s + 17);
      const GradCheckResult r = c.run(rng);
      ++e.seeds;
      if (!r.finite()) e.max_rel_error = std::max(e.max_rel_error, 1e300);
      if (!r.passed(tolerance)) e.passed = false;
      if (r.max_rel_error >= e.max_rel_error) {
        e.max_rel_error = r.max_rel_error;
        e.worst = "seed " + std::to_string(s) + ": " + r.describe();
      }
    }
    report.entries.push_back(std::move(e));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace talkface
