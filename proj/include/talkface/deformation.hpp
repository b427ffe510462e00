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

#include <array>
#include <cstddef>
#include <vector>

#include "talkface/nn.hpp"
#include "talkface/tensor.hpp"

namespace talkface {

// Per-channel similarity transform coefficients, each a C-vector.
struct AffineCoeffSet {
  Tensor theta;  // radians
  Tensor tx;     // normalized grid units
  Tensor ty;
  Tensor scale;  // > 0

  std::size_t channels() const { return theta.size(); }
};

inline constexpr double kScaleFloor = 0.1;

// Four fully-connected heads; weights start at zero and biases at the
// identity transform.
struct CoeffHeads {
  Linear theta;
  Linear tx;
  Linear ty;
  Linear raw_scale;
};

enum class WarpPadding { kBorder, kZeros };

// Lower-half supervision masks at full, half and quarter resolution.
struct MaskPyramid {
  std::vector<Tensor> levels;  // each 1 x H_k x W_k
};

struct FaceDecoder {
  Conv2d up1;
  Conv2d up2;
  Conv2d out;
};

struct BlendNet {
  Conv2d first;
  Conv2d second;  // zero-initialized: the untrained net adds no residual
};

struct FaceBox {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t bottom = 0;  // exclusive
  std::size_t right = 0;   // exclusive
};

struct BlendInputs {
  Tensor generated;  // I_o, 3 x H x W
  Tensor source;     // 3 x H x W
  Tensor mask;       // 1 x H x W in [0, 1]
};

struct BlendOutput {
  Tensor composite;
  Tensor final_frame;
};

inline constexpr double kBlendResidualCap = 0.1;

CoeffHeads make_coeff_heads(ParameterStore& store, std::size_t in_features,
                            std::size_t channels);
FaceDecoder make_face_decoder(ParameterStore& store, std::size_t channels, Rng& rng);
BlendNet make_blend_net(ParameterStore& store, std::size_t hidden, Rng& rng);

AffineCoeffSet predict_affine_coeffs(const Tensor& fused_feature, const CoeffHeads& heads);
AffineCoeffSet identity_coeffs(std::size_t channels);

// Forward coordinate map [x'; y'] = s R(theta) [x; y] + t on the normalized grid.
std::array<double, 2> affine_forward_point(double theta, double tx, double ty,
                                           double scale, double x, double y);

// Backward warping: each output cell samples the input at the closed-form
// inverse of the forward map, with bilinear interpolation.
Tensor affine_warp(const Tensor& feature, const AffineCoeffSet& coeffs,
                   WarpPadding padding = WarpPadding::kBorder);

MaskPyramid build_mask_pyramid(std::size_t height, std::size_t width);

// Concatenates F_s and F_d, upsamples 4x through convolutions, sigmoid output.
Tensor decode_face(const Tensor& source_feature, const Tensor& deformed_feature,
                   const FaceDecoder& decoder);

Tensor gaussian_face_mask(std::size_t height, std::size_t width, const FaceBox& box,
                          double sigma);

BlendOutput composite_and_blend(const BlendInputs& inputs, const BlendNet& net);

}  // namespace talkface
