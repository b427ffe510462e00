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

#include "talkface/losses.hpp"

#include <cmath>
#include <string>
#include <tuple>
#include <utility>

#include "talkface/error.hpp"
#include "talkface/ops.hpp"

namespace talkface {

namespace {

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " differ");
  }
}

Tensor guarded_norm(const Tensor& x) {
  return ops::sqrt(ops::sum(ops::square(x)) + kCosineEpsilon * kCosineEpsilon);
}

}  // namespace

void LossWeights::validate() const {
  const std::pair<const char*, double> all[] = {{"lambda_v", attribute},
                                                {"lambda_p", perception},
                                                {"lambda_gan", adversarial},
                                                {"lambda_r", reconstruction},
                                                {"lambda_con", contrastive}};
  for (const auto& [name, v] : all) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ContractError(std::string("loss weight ") + name + " must be finite and >= 0");
    }
  }
}

RandomConvExtractor::RandomConvExtractor(std::uint64_t seed) {
  ParameterStore scratch;
  Rng rng(seed);
  layers_.push_back(make_conv(scratch, "v1", 3, 8, 3, 1, 1, rng));
  layers_.push_back(make_conv(scratch, "v2", 8, 16, 3, 2, 1, rng));
  layers_.push_back(make_conv(scratch, "v3", 16, 16, 3, 2, 1, rng));
  // Frozen: detach from the scratch store and drop requires_grad.
  for (Conv2d& c : layers_) {
    c.weight = c.weight.detach();
    c.bias = c.bias.detach();
  }
}

std::vector<Tensor> RandomConvExtractor::stages(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("feature extractor: expected 3 x H x W image, got " +
                     shape_to_string(image.shape()));
  }
  std::vector<Tensor> out;
  Tensor x = image;
  for (const Conv2d& layer : layers_) {
    x = ops::leaky_relu(layer(x));
    out.push_back(x);
  }
  return out;
}

Tensor facial_attribute_loss(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1) throw ShapeError("facial_attribute_loss: expected vectors, got " + shape_to_string(a.shape()));
  require_same("facial_attribute_loss", a, b);
  return 1.0 - ops::sum(a * b) / (guarded_norm(a) * guarded_norm(b));
}

Tensor perception_loss(const Tensor& generated, const Tensor& real,
                       const FeatureExtractor& extractor) {
  require_same("perception_loss", generated, real);
  const std::vector<Tensor> full_g = extractor.stages(generated);
  const std::vector<Tensor> full_r = extractor.stages(real);
  const std::vector<Tensor> half_g = extractor.stages(ops::avg_pool2x(generated));
  const std::vector<Tensor> half_r = extractor.stages(ops::avg_pool2x(real));
  const std::size_t n = full_g.size();
  if (n < 2 || full_r.size() != n || half_g.size() != n || half_r.size() != n) {
    throw ContractError("perception_loss: extractor must yield the same >= 2 stages for every input");
  }
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double norm = 2.0 * static_cast<double>(n) * static_cast<double>(full_g[i].size());
    const Tensor term = ops::sum(ops::abs(full_g[i] - full_r[i])) +
                        ops::sum(ops::abs(half_g[i] - half_r[i]));
    total = total + term / norm;
  }
  return total;
}

GanLosses lsgan_losses(const Tensor& real_scores, const Tensor& fake_scores) {
  GanLosses g;
  g.discriminator = 0.5 * ops::mean(ops::square(real_scores - 1.0)) +
                    0.5 * ops::mean(ops::square(fake_scores));
  g.generator = ops::mean(ops::square(fake_scores - 1.0));
  return g;
}

Tensor l1_reconstruction(const Tensor& generated, const Tensor& target,
                         const MaskPyramid& masks) {
  require_same("l1_reconstruction", generated, target);
  if (masks.levels.empty()) throw ContractError("l1_reconstruction: empty mask pyramid");
  Tensor g = generated, t = target;
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t k = 0; k < masks.levels.size(); ++k) {
    if (k > 0) {
      g = ops::avg_pool2x(g);
      t = ops::avg_pool2x(t);
    }
    const Tensor& m = masks.levels[k];
    if (m.rank() != 3 || m.dim(0) != 1 || m.dim(1) != g.dim(1) || m.dim(2) != g.dim(2)) {
      throw ShapeError("l1_reconstruction: mask level " + std::to_string(k) + " " +
                       shape_to_string(m.shape()) + " does not match image " +
                       shape_to_string(g.shape()));
    }
    double coverage = 0.0;
    for (double v : m.data()) coverage += v;
    if (coverage <= 0.0) throw ContractError("l1_reconstruction: mask level " + std::to_string(k) + " is zero");
    total = total + ops::mean(m * ops::abs(g - t)) / ops::mean(m);
  }
  return total / static_cast<double>(masks.levels.size());
}

Tensor l1_reconstruction_unmasked(const Tensor& generated, const Tensor& target) {
  require_same("l1_reconstruction", generated, target);
  return ops::mean(ops::abs(generated - target));
}

Tensor contrastive_loss(const SimilarityPair& p) {
  const Tensor& va = p.visual_to_audio;
  const Tensor& av = p.audio_to_visual;
  if (va.rank() != 2 || va.dim(0) != va.dim(1) || av.shape() != va.shape()) {
    throw ShapeError("contrastive_loss: expected two matching square matrices, got " +
                     shape_to_string(va.shape()) + " and " + shape_to_string(av.shape()));
  }
  const Tensor h_va = -ops::mean(ops::log(ops::diagonal(va) + kLogGuard));
  const Tensor h_av = -ops::mean(ops::log(ops::diagonal(av) + kLogGuard));
  return 0.5 * (h_va + h_av);
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  const std::pair<const char*, double> parts[] = {{"L_v", c.attribute},
                                                  {"L_p", c.perception},
                                                  {"L_GAN", c.adversarial},
                                                  {"L_r", c.reconstruction},
                                                  {"L_con", c.contrastive}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) throw ContractError(std::string("total_loss: component ") + name + " is not finite");
  }
  return w.attribute * c.attribute + w.perception * c.perception +
         w.adversarial * c.adversarial + w.reconstruction * c.reconstruction +
         w.contrastive * c.contrastive;
}

Tensor total_loss(const LossTerms& t, const LossWeights& w) {
  Tensor total = Tensor::scalar(0.0);
  const std::tuple<const char*, const Tensor*, double> parts[] = {
      {"L_v", &t.attribute, w.attribute},
      {"L_p", &t.perception, w.perception},
      {"L_GAN", &t.adversarial, w.adversarial},
      {"L_r", &t.reconstruction, w.reconstruction},
      {"L_con", &t.contrastive, w.contrastive}};
  for (const auto& [name, term, weight] : parts) {
    if (!term->defined()) continue;
    if (!std::isfinite(term->item())) {
      throw ContractError(std::string("total_loss: component ") + name + " is not finite");
    }
    // A zero weight removes the term from the graph entirely.
    if (weight != 0.0) total = total + weight * *term;
  }
  return total;
}

}  // namespace talkface
