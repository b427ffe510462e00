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

#include "talkface/alignment.hpp"

#include <string>

#include "talkface/error.hpp"
#include "talkface/ops.hpp"

namespace talkface {

AdaInParams make_adain_params(ParameterStore& store, const std::string& prefix,
                              std::size_t feature_dim, std::size_t channels, Rng& rng) {
  AdaInParams p;
  p.sigma = make_linear(store, prefix + ".sigma", feature_dim, channels, rng, 0.1);
  p.mu = make_linear(store, prefix + ".mu", feature_dim, channels, rng, 0.1);
  // Start from unit target scale so the block begins as instance normalization.
  for (double& b : p.sigma.bias.mutable_data()) b = 1.0;
  return p;
}

ResidualAdaInBlock make_residual_adain_block(ParameterStore& store,
                                             const std::string& prefix,
                                             std::size_t feature_dim,
                                             std::size_t channels, Rng& rng) {
  ResidualAdaInBlock block;
  block.adain = make_adain_params(store, prefix + ".adain", feature_dim, channels, rng);
  block.conv = make_conv(store, prefix + ".conv", channels, channels, 3, 1, 1, rng, 0.5);
  return block;
}

ProjectionHeads make_projection_heads(ParameterStore& store, std::size_t channels,
                                      std::size_t feature_dim, std::size_t embed_dim,
                                      Rng& rng) {
  ProjectionHeads h;
  h.visual = make_linear(store, "sync.g_v", channels, embed_dim, rng);
  h.audio = make_linear(store, "sync.g_a", feature_dim, embed_dim, rng);
  h.visual_prime = make_linear(store, "sync.g_v_prime", channels, embed_dim, rng);
  h.audio_prime = make_linear(store, "sync.g_a_prime", feature_dim, embed_dim, rng);
  return h;
}

Tensor adain(const Tensor& feature, const Tensor& target_std, const Tensor& target_mean) {
  if (feature.rank() != 3) {
    throw ShapeError("adain: expected C x H x W feature, got " +
                     shape_to_string(feature.shape()));
  }
  const std::size_t c = feature.dim(0);
  if (target_std.size() != c || target_mean.size() != c) {
    throw ShapeError("adain: target statistics " + shape_to_string(target_std.shape()) +
                     " / " + shape_to_string(target_mean.shape()) +
                     " do not match feature " + shape_to_string(feature.shape()));
  }
  auto [mu, sigma] = ops::channel_stats(feature);
  const Shape column{c, 1, 1};
  const Tensor normalized = (feature - ops::reshape(mu, column)) / ops::reshape(sigma, column);
  return normalized * ops::reshape(target_std, column) + ops::reshape(target_mean, column);
}

Tensor adain(const Tensor& feature, const Tensor& landmark, const AdaInParams& params) {
  return adain(feature, params.sigma(landmark), params.mu(landmark));
}

Tensor residual_adain_block(const Tensor& feature, const Tensor& landmark,
                            const ResidualAdaInBlock& block) {
  return feature + block.conv(ops::leaky_relu(adain(feature, landmark, block.adain)));
}

ScorePair score_matrices(const Tensor& visual, const Tensor& audio,
                         const ProjectionHeads& heads, double temperature) {
  if (visual.rank() != 2 || audio.rank() != 2 || visual.dim(0) != audio.dim(0)) {
    throw ShapeError("score_matrices: batch mismatch between visual " +
                     shape_to_string(visual.shape()) + " and audio " +
                     shape_to_string(audio.shape()));
  }
  const Tensor gv = ops::l2_normalize(heads.visual(visual));
  const Tensor ga = ops::l2_normalize(heads.audio(audio));
  const Tensor gv_prime = ops::l2_normalize(heads.visual_prime(visual));
  const Tensor ga_prime = ops::l2_normalize(heads.audio_prime(audio));
  ScorePair s;
  s.visual_to_audio = ops::matmul(gv, ops::transpose(ga_prime));
  s.audio_to_visual = ops::matmul(ga, ops::transpose(gv_prime));
  s.temperature = temperature;
  return s;
}

SimilarityPair similarity_distributions(const ScorePair& scores) {
  SimilarityPair p;
  p.visual_to_audio = ops::softmax(scores.visual_to_audio, 1, scores.temperature);
  p.audio_to_visual = ops::softmax(scores.audio_to_visual, 1, scores.temperature);
  return p;
}

}  // namespace talkface
