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
#include <cstdint>
#include <optional>
#include <vector>

#include "talkface/audio.hpp"
#include "talkface/config.hpp"
#include "talkface/deformation.hpp"
#include "talkface/encoders.hpp"
#include "talkface/metrics.hpp"
#include "talkface/tensor.hpp"

namespace talkface {

inline constexpr std::size_t kLandmarkCount = 68;
inline constexpr double kSamplesPerFrame = audio::kSampleRate / audio::kVideoFps;  // 640

// Pose and expression of the procedural face at one video frame.
struct FaceState {
  double bob_x = 0.0;  // head offset, fraction of the frame
  double bob_y = 0.0;
  double blink = 0.0;  // 0 open .. 1 closed
  double mouth_open = 0.0;  // 0 .. 1
};

using Landmark = std::array<double, 2>;  // (x, y) in pixels

Tensor render_face(const FaceState& state, std::size_t size);
std::vector<Landmark> face_landmarks(const FaceState& state, std::size_t size);
// Sparse 0/1 heatmap with one lit pixel per landmark.
Tensor landmark_heatmap(const std::vector<Landmark>& points, std::size_t size);

// Regions shared by scene generation, compositing and evaluation.
FaceBox lower_face_box(std::size_t size);
metrics::CropBox mouth_crop_box();

// Speech-like tone sequence: harmonic syllables under raised-cosine envelopes.
audio::AudioClip synthesize_speech(double seconds, std::uint64_t seed);

// RMS of the samples within half a frame of video frame f.
std::vector<double> frame_rms(const audio::AudioClip& clip, std::size_t frames);

struct SyntheticClip {
  audio::AudioClip audio;
  audio::MelSpectrogram mel;
  std::vector<FaceState> states;
  std::vector<double> rms;
  std::vector<Tensor> frames;  // 3 x H x W
};

// Mouth opening follows the per-frame RMS linearly (max RMS = fully open).
SyntheticClip make_clip(const audio::AudioClip& clip, std::size_t size, std::size_t frames);

struct Dataset {
  SyntheticClip clip;
  std::vector<SceneSample> samples;
};

// Sample timesteps are spaced by 5..20 frames so in-batch audio always
// comes from a different moment. Pass a WAV clip to drive the face with it.
Dataset generate_dataset(const PipelineConfig& config, std::size_t n_samples,
                         const std::optional<audio::AudioClip>& audio = std::nullopt);

// Frames needed by generate_dataset for n samples.
std::size_t frames_required(std::size_t n_samples);

}  // namespace talkface
