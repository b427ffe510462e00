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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "talkface/tensor.hpp"

namespace talkface::audio {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kWindowLength = 800;
inline constexpr std::size_t kFftSize = 800;
inline constexpr std::size_t kHopLength = 200;
inline constexpr std::size_t kMelBins = 80;
inline constexpr std::size_t kWindowFrames = 16;
inline constexpr double kMelMinHz = 55.0;
inline constexpr double kMelMaxHz = 7600.0;
inline constexpr double kLogFloor = 1e-5;
inline constexpr double kVideoFps = 25.0;

struct AudioClip {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = kSampleRate;

  double duration() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// 16-bit PCM WAV, mono or stereo (averaged); resampled to 16 kHz.
AudioClip load_wav(const std::filesystem::path& path);
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
// 16-bit PCM mono at the clip's sample rate.
void save_wav(const std::filesystem::path& path, const AudioClip& clip);
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);

// Linear-interpolation resampling; output length round(n * to / from).
std::vector<double> resample_linear(std::span<const double> samples, int from_rate,
                                    int to_rate);

// Log10 mel energies, one row per hop.
struct MelSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = kMelBins;
  std::vector<double> values;  // row-major frames x bins

  double at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
};

// Triangular filters on the HTK mel scale, rows = mel bins, columns = the
// kFftSize / 2 + 1 one-sided FFT bins.
struct MelFilterbank {
  std::size_t bins = kMelBins;
  std::size_t fft_bins = kFftSize / 2 + 1;
  std::vector<double> weights;
  std::vector<double> center_hz;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);
const MelFilterbank& mel_filterbank();

MelSpectrogram mel_spectrogram(const AudioClip& clip);

struct MelWindow {
  std::vector<double> values;  // kWindowFrames x kMelBins

  // 1 x 16 x 80 tensor suitable for the audio encoder.
  Tensor tensor() const;
};

// Mel frame at the centre of video frame `frame_index`.
std::size_t mel_center_for_frame(std::size_t frame_index, double fps = kVideoFps);
// First mel frame of the window assigned to `frame_index` after edge clamping.
std::size_t window_start_for_frame(const MelSpectrogram& mel,
                                   std::size_t frame_index, double fps = kVideoFps);
MelWindow window_for_frame(const MelSpectrogram& mel, std::size_t frame_index,
                           double fps = kVideoFps);
// Number of video frames whose centre falls inside the spectrogram.
std::size_t video_frame_count(const MelSpectrogram& mel, double fps = kVideoFps);

// Binary matrix file: "G4GMEL1", rows and cols as uint32 LE, row-major float32.
void save_mel_matrix(const std::filesystem::path& path, const MelSpectrogram& mel);
MelSpectrogram load_mel_matrix(const std::filesystem::path& path);
void save_mel_text(const std::filesystem::path& path, const MelSpectrogram& mel);

}  // namespace talkface::audio
