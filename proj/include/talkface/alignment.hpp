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

#include "talkface/nn.hpp"
#include "talkface/tensor.hpp"

namespace talkface {

inline constexpr double kDefaultTemperature = 0.07;

// Two fully-connected maps from the landmark vector to per-channel target
// scale and shift.
struct AdaInParams {
  Linear sigma;
  Linear mu;
};

struct ResidualAdaInBlock {
  AdaInParams adain;
  Conv2d conv;
};

// g_v, g_a and their primed counterparts. Visual heads read the pooled
// aligned feature (C), audio heads the audio feature (d).
struct ProjectionHeads {
  Linear visual;
  Linear audio;
  Linear visual_prime;
  Linear audio_prime;
};

// s_va: rows are visual samples, columns audio samples; s_av the reverse.
struct ScorePair {
  Tensor visual_to_audio;
  Tensor audio_to_visual;
  double temperature = kDefaultTemperature;
};

// Row-stochastic matrices; the diagonal holds the synced pairs.
struct SimilarityPair {
  Tensor visual_to_audio;
  Tensor audio_to_visual;
};

AdaInParams make_adain_params(ParameterStore& store, const std::string& prefix,
                              std::size_t feature_dim, std::size_t channels, Rng& rng);
ResidualAdaInBlock make_residual_adain_block(ParameterStore& store,
                                             const std::string& prefix,
                                             std::size_t feature_dim,
                                             std::size_t channels, Rng& rng);
ProjectionHeads make_projection_heads(ParameterStore& store, std::size_t channels,
                                      std::size_t feature_dim, std::size_t embed_dim,
                                      Rng& rng);

// sigma_dot * (x - mu(x)) / sigma(x) + mu_dot per channel of a C x H x W map.
Tensor adain(const Tensor& feature, const Tensor& target_std, const Tensor& target_mean);
Tensor adain(const Tensor& feature, const Tensor& landmark, const AdaInParams& params);

// feature + conv(leaky_relu(adain(feature, landmark))).
Tensor residual_adain_block(const Tensor& feature, const Tensor& landmark,
                            const ResidualAdaInBlock& block);

// visual: B x C pooled aligned features, audio: B x d audio features.
ScorePair score_matrices(const Tensor& visual, const Tensor& audio,
                         const ProjectionHeads& heads,
                         double temperature = kDefaultTemperature);

SimilarityPair similarity_distributions(const ScorePair& scores);

}  // namespace talkface
