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

#include "talkface/encoders.hpp"

#include <string>

#include "talkface/error.hpp"
#include "talkface/ops.hpp"

namespace talkface {

namespace {

void require_channels(const char* op, const Tensor& x, std::size_t channels) {
  if (x.rank() != 3 || x.dim(0) != channels) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(channels) +
                     " x H x W input, got " + shape_to_string(x.shape()));
  }
}

}  // namespace

void ModelDims::validate() const {
  if (image_size < 16 || image_size % 4 != 0) {
    throw ContractError("image_size must be a multiple of 4 and at least 16");
  }
  if (channels < 2 || feature_dim == 0 || embed_dim == 0) {
    throw ContractError("channels >= 2 and positive feature/embedding widths required");
  }
}

Tensor ConvEncoder::operator()(const Tensor& x) const {
  return ops::leaky_relu(second(ops::leaky_relu(first(x))));
}

ConvEncoder make_conv_encoder(ParameterStore& store, const std::string& prefix,
                              std::size_t in_channels, std::size_t channels,
                              Rng& rng) {
  ConvEncoder enc;
  enc.first = make_conv(store, prefix + ".conv1", in_channels, channels, 3, 2, 1, rng);
  enc.second = make_conv(store, prefix + ".conv2", channels, channels, 3, 2, 1, rng);
  return enc;
}

Encoders make_encoders(ParameterStore& store, const ModelDims& dims, Rng& rng) {
  dims.validate();
  const std::size_t c = dims.channels;
  Encoders e;
  e.audio.body = make_conv_encoder(store, "audio_encoder", 1, c, rng);
  // 16 x 80 mel input becomes 4 x 20 after two stride-2 convolutions.
  e.audio.head = make_linear(store, "audio_encoder.fc", c * 4 * 20, dims.feature_dim, rng);
  e.source = make_conv_encoder(store, "source_encoder", 3, c, rng);
  e.reference = make_conv_encoder(store, "reference_encoder", 3 * kReferenceCount, c, rng);
  e.landmark.body = make_conv_encoder(store, "landmark_encoder", 1, c, rng);
  e.landmark.head = make_linear(store, "landmark_encoder.fc", c, dims.feature_dim, rng);
  e.fusion.projection = make_conv(store, "fusion.proj", 2 * c, c, 1, 1, 0, rng);
  return e;
}

Tensor encode_audio(const Tensor& mel, const AudioEncoder& encoder) {
  if (mel.shape() != Shape{1, audio::kWindowFrames, audio::kMelBins}) {
    throw ShapeError("encode_audio: expected [1x16x80] mel window, got " +
                     shape_to_string(mel.shape()));
  }
  const Tensor map = encoder.body(mel);
  return encoder.head(ops::reshape(map, {map.size()}));
}

Tensor encode_audio(const audio::MelWindow& mel, const AudioEncoder& encoder) {
  return encode_audio(mel.tensor(), encoder);
}

Tensor encode_source(const Tensor& masked_source, const ConvEncoder& encoder) {
  require_channels("encode_source", masked_source, 3);
  return encoder(masked_source);
}

Tensor encode_reference(const Tensor& references, const ConvEncoder& encoder) {
  require_channels("encode_reference", references, 3 * kReferenceCount);
  return encoder(references);
}

LandmarkFeatures encode_landmark(const Tensor& landmark_map,
                                 const LandmarkEncoder& encoder) {
  require_channels("encode_landmark", landmark_map, 1);
  LandmarkFeatures out;
  out.spatial = encoder.body(landmark_map);
  out.pooled = encoder.head(ops::global_avg_pool(out.spatial));
  return out;
}

Tensor fuse_source_reference(const Tensor& source_feature,
                             const Tensor& reference_feature,
                             const FusionLayer& fusion) {
  if (source_feature.rank() != 3 || reference_feature.rank() != 3 ||
      source_feature.dim(1) != reference_feature.dim(1) ||
      source_feature.dim(2) != reference_feature.dim(2)) {
    throw ShapeError("fuse_source_reference: spatial mismatch between " +
                     shape_to_string(source_feature.shape()) + " and " +
                     shape_to_string(reference_feature.shape()));
  }
  return fusion.projection(ops::concat({source_feature, reference_feature}, 0));
}

}  // namespace talkface
