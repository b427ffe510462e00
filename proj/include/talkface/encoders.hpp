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

#include "talkface/audio.hpp"
#include "talkface/nn.hpp"
#include "talkface/tensor.hpp"

namespace talkface {

// Network widths shared by every stage.
struct ModelDims {
  std::size_t image_size = 64;  // H = W
  std::size_t channels = 32;    // C, spatial feature width
  std::size_t feature_dim = 128;  // d, vector feature width
  std::size_t embed_dim = 64;   // contrastive embedding width

  std::size_t feature_size() const { return image_size / 4; }
  void validate() const;
};

inline constexpr std::size_t kReferenceCount = 5;

// One training example. Frames are 3 x H x W in [0, 1].
struct SceneSample {
  Tensor source_frame;
  Tensor truth_frame;
  Tensor masked_source;    // source with rows >= H/2 zeroed
  Tensor references;       // 15 x H x W, five RGB frames stacked
  Tensor landmark_map;     // 1 x H x W, sparse 0/1 heatmap
  Tensor neighbor_frames;  // 12 x H x W, truth frames t-2, t-1, t+1, t+2
  audio::MelWindow mel;
  std::size_t frame_index = 0;
};

// conv3x3/2 -> leaky relu -> conv3x3/2 -> leaky relu.
struct ConvEncoder {
  Conv2d first;
  Conv2d second;

  Tensor operator()(const Tensor& x) const;
  std::size_t in_channels() const { return first.weight.dim(1); }
};

struct AudioEncoder {
  ConvEncoder body;
  Linear head;  // flattened C x 4 x 20 map -> d
};

struct LandmarkEncoder {
  ConvEncoder body;
  Linear head;  // pooled C -> d
};

struct LandmarkFeatures {
  Tensor spatial;  // C x H/4 x W/4
  Tensor pooled;   // d
};

// Channel concatenation followed by a 1x1 projection back to C channels.
struct FusionLayer {
  Conv2d projection;
};

struct Encoders {
  AudioEncoder audio;
  ConvEncoder source;
  ConvEncoder reference;
  LandmarkEncoder landmark;
  FusionLayer fusion;
};

ConvEncoder make_conv_encoder(ParameterStore& store, const std::string& prefix,
                              std::size_t in_channels, std::size_t channels, Rng& rng);
Encoders make_encoders(ParameterStore& store, const ModelDims& dims, Rng& rng);

Tensor encode_audio(const Tensor& mel, const AudioEncoder& encoder);
Tensor encode_audio(const audio::MelWindow& mel, const AudioEncoder& encoder);
Tensor encode_source(const Tensor& masked_source, const ConvEncoder& encoder);
Tensor encode_reference(const Tensor& references, const ConvEncoder& encoder);
LandmarkFeatures encode_landmark(const Tensor& landmark_map,
                                 const LandmarkEncoder& encoder);
Tensor fuse_source_reference(const Tensor& source_feature,
                             const Tensor& reference_feature,
                             const FusionLayer& fusion);

}  // namespace talkface
