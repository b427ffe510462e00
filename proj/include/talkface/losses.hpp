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
#include <cstdint>
#include <string>
#include <vector>

#include "talkface/alignment.hpp"
#include "talkface/deformation.hpp"
#include "talkface/nn.hpp"
#include "talkface/tensor.hpp"

namespace talkface {

struct LossWeights {
  double attribute = 1.0;       // lambda_v
  double perception = 2.0;      // lambda_p
  double adversarial = 3.0;     // lambda_GAN
  double reconstruction = 4.0;  // lambda_r
  double contrastive = 5.0;     // lambda_con

  void validate() const;
};

// Scalar values of the five terms, for logging and the weighted total.
struct LossComponents {
  double attribute = 0.0;
  double perception = 0.0;
  double adversarial = 0.0;  // L_G + L_D
  double reconstruction = 0.0;
  double contrastive = 0.0;
};

// Differentiable counterpart used to build the generator objective.
struct LossTerms {
  Tensor attribute;
  Tensor perception;
  Tensor adversarial;
  Tensor reconstruction;
  Tensor contrastive;
};

// Ordered feature stages V_i of a 3 x H x W image.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<Tensor> stages(const Tensor& image) const = 0;
  virtual std::size_t stage_count() const = 0;
};

// Frozen random convolution pyramid: conv3x3 3->8, then two stride-2
// conv3x3 stages to 16 channels, each followed by leaky relu.
class RandomConvExtractor final : public FeatureExtractor {
 public:
  explicit RandomConvExtractor(std::uint64_t seed = 1234);

  std::vector<Tensor> stages(const Tensor& image) const override;
  std::size_t stage_count() const override { return layers_.size(); }
  const std::vector<Conv2d>& layers() const { return layers_; }

 private:
  std::vector<Conv2d> layers_;
};

inline constexpr double kCosineEpsilon = 1e-8;
inline constexpr double kLogGuard = 1e-12;

// 1 - cos(a, b); the epsilon enters each norm as sqrt(|x|^2 + eps^2).
Tensor facial_attribute_loss(const Tensor& a, const Tensor& b);

// Two-scale L1 distance between feature stages, each stage normalized by
// 2 N W_i H_i C_i.
Tensor perception_loss(const Tensor& generated, const Tensor& real,
                       const FeatureExtractor& extractor);

struct GanLosses {
  Tensor discriminator;  // 1/2 mean((D_r - 1)^2) + 1/2 mean(D_f^2)
  Tensor generator;      // mean((D_f - 1)^2)
};
GanLosses lsgan_losses(const Tensor& real_scores, const Tensor& fake_scores);

// Mean over pyramid levels of mean(m_k |g_k - t_k|) / mean(m_k), with the
// images area-downsampled to each level.
Tensor l1_reconstruction(const Tensor& generated, const Tensor& target,
                         const MaskPyramid& masks);
Tensor l1_reconstruction_unmasked(const Tensor& generated, const Tensor& target);

// Cross-entropy against the one-hot diagonal, averaged over both directions.
Tensor contrastive_loss(const SimilarityPair& p);

double total_loss(const LossComponents& c, const LossWeights& w);
Tensor total_loss(const LossTerms& t, const LossWeights& w);

}  // namespace talkface
