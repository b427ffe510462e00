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
#include <filesystem>
#include <vector>

#include "talkface/audio.hpp"
#include "talkface/losses.hpp"
#include "talkface/tensor.hpp"

namespace talkface::metrics {

inline constexpr double kPsnrCap = 100.0;
inline constexpr double kMseFloor = 1e-10;
inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr int kSyncOffset = 15;         // offsets k in [-15, 15]
inline constexpr std::size_t kSyncFrames = 5;  // visual window length

struct ImageScores {
  double psnr = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
};

// Images are C x H x W with values in [0, range].
double mse(const Tensor& a, const Tensor& b);
double psnr(const Tensor& a, const Tensor& b, double range = 1.0);
// Mean local SSIM over valid 11x11 Gaussian windows, averaged over channels.
double ssim(const Tensor& a, const Tensor& b, double range = 1.0);
ImageScores psnr_ssim_mse(const Tensor& a, const Tensor& b, double range = 1.0);

// Normalized 11-tap Gaussian used by SSIM.
std::vector<double> ssim_kernel();

using Embedding = std::vector<double>;

// Maps a 5-frame visual window and a mel window to a shared embedding space.
class SyncEmbedder {
 public:
  virtual ~SyncEmbedder() = default;
  virtual Embedding embed_visual(const std::vector<Tensor>& frames) const = 0;
  virtual Embedding embed_audio(const audio::MelWindow& mel) const = 0;
};

// Mouth darkness over five crops against the loudness of five matching
// slices of the mel window; both mean-removed and unit-normalized.
class ProceduralSyncEmbedder final : public SyncEmbedder {
 public:
  Embedding embed_visual(const std::vector<Tensor>& frames) const override;
  Embedding embed_audio(const audio::MelWindow& mel) const override;
};

struct SyncScores {
  double distance = 0.0;    // LSE-D
  double confidence = 0.0;  // LSE-C
  std::size_t windows = 0;  // positions evaluated
};

// d(t, k) = |v_t - a_{t+k}|; evaluated at every t where all offsets exist.
SyncScores lse_from_embeddings(const std::vector<Embedding>& visual,
                               const std::vector<Embedding>& audio,
                               int max_offset = kSyncOffset);

// frames[i] is paired with mels[i]. Visual windows are centred (i-2 .. i+2).
SyncScores lse(const std::vector<Tensor>& frames, const std::vector<audio::MelWindow>& mels,
               const SyncEmbedder& embedder, int max_offset = kSyncOffset);

// Fixed crop region in fractional frame coordinates.
struct CropBox {
  double top = 0.6, left = 0.3, bottom = 0.85, right = 0.7;
};
Tensor crop(const Tensor& frame, const CropBox& box);

// Mean L1 feature distance through a pluggable extractor; a pretrained
// backend turns this into an LPIPS-style score.
double feature_distance(const Tensor& a, const Tensor& b, const FeatureExtractor& extractor);

struct MetricReport {
  std::vector<ImageScores> frames;
  ImageScores mean;
  bool has_sync = false;
  SyncScores sync;

  std::size_t frame_count() const { return frames.size(); }
};

// Frames are paired by index.
MetricReport evaluate_frames(const std::vector<Tensor>& generated,
                             const std::vector<Tensor>& reference);

// frame,psnr,ssim,mse header then one row per frame.
void write_report_csv(const std::filesystem::path& path, const MetricReport& report);
// Per-frame PSNR and SSIM line plot.
void write_report_svg(const std::filesystem::path& path, const MetricReport& report);

}  // namespace talkface::metrics
