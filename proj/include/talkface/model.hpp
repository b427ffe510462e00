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
#include <vector>

#include "talkface/alignment.hpp"
#include "talkface/config.hpp"
#include "talkface/deformation.hpp"
#include "talkface/encoders.hpp"
#include "talkface/losses.hpp"
#include "talkface/nn.hpp"

namespace talkface {

// Three strided 3x3 convolutions producing a map of patch scores.
struct Critic {
  Conv2d first;
  Conv2d second;
  Conv2d out;
  Tensor operator()(const Tensor& x) const;  // flattened scores
};

Critic make_critic(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                   Rng& rng);

// All trainable state. Parameters live in three stores so each training
// phase can freeze or checkpoint them independently.
struct Model {
  explicit Model(const PipelineConfig& config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  ModelDims dims;
  bool plain_alignment_only = false;

  ParameterStore generator_store;
  ParameterStore sync_store;
  ParameterStore critic_store;

  Encoders encoders;
  std::vector<ResidualAdaInBlock> alignment;
  Conv2d plain_alignment;  // replaces the residual blocks when alignment is ablated
  Linear attribute_head;   // pooled source feature C -> d
  CoeffHeads coeff_heads;
  FaceDecoder decoder;
  BlendNet blend;
  ProjectionHeads sync;
  Critic frame_critic;  // single frames, 3 channels
  Critic clip_critic;   // five consecutive frames, 15 channels

  Tensor face_mask;  // Gaussian-smoothed lower-face box
  MaskPyramid masks;

  std::vector<const ParameterStore*> stores() const;
  std::vector<ParameterStore*> stores();
};

struct SampleForward {
  Tensor audio;             // a, d
  Tensor source_feature;    // i_s
  Tensor reference_feature; // i_r, also the warp input
  Tensor landmark;          // l_r, d
  Tensor fused;             // fused source/reference feature
  Tensor aligned;           // after alignment, C x H/4 x W/4
  Tensor attribute;         // attribute head output, d
  AffineCoeffSet coeffs;
  Tensor deformed;          // warped reference feature
  Tensor generated;         // I_o
  Tensor composite;
  Tensor final_frame;
};

struct ForwardResult {
  std::vector<SampleForward> samples;
  Tensor visual_batch;  // B x C pooled aligned features
  Tensor audio_batch;   // B x d
  ScorePair scores;
  SimilarityPair similarity;
};

// Runs the generator on a batch. Ablation flags are read from `config`;
// no_alignment must match the model it was built with.
ForwardResult forward(const Model& model, std::span<const SceneSample> batch,
                      const PipelineConfig& config);

// Weights actually applied in the objective and the logged total. The
// contrastive term is dropped when alignment is ablated.
LossWeights effective_weights(const PipelineConfig& config);

struct GeneratorLosses {
  LossTerms terms;  // adversarial holds L_G only
  Tensor objective;
};

GeneratorLosses generator_losses(const Model& model, const ForwardResult& result,
                                 std::span<const SceneSample> batch, const PipelineConfig& config,
                                 const FeatureExtractor& extractor);

// LS-GAN critic loss over both critics; fakes are detached final frames.
Tensor discriminator_loss(const Model& model, const ForwardResult& result,
                          std::span<const SceneSample> batch);

// 15-channel stack t-2 .. t+2 with `centre` at t.
Tensor clip_stack(const SceneSample& sample, const Tensor& centre);

}  // namespace talkface
