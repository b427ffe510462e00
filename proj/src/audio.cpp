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

#include "talkface/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>

#include "binary_io.hpp"
#include "talkface/error.hpp"

namespace talkface::audio {

namespace {

constexpr char kMelMagic[] = "G4GMEL1";
constexpr std::size_t kMelMagicLength = 7;

// FFTW planning is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::vector<double> resample_linear(std::span<const double> samples, int from_rate,
                                    int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw ContractError("sample rates must be positive");
  if (from_rate == to_rate) return {samples.begin(), samples.end()};
  if (samples.empty()) return {};
  const auto out_len = static_cast<std::size_t>(std::llround(
      static_cast<double>(samples.size()) * to_rate / static_cast<double>(from_rate)));
  std::vector<double> out(out_len);
  const double ratio = static_cast<double>(from_rate) / to_rate;
  const std::size_t last = samples.size() - 1;
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto left = std::min(static_cast<std::size_t>(pos), last);
    const std::size_t right = std::min(left + 1, last);
    const double frac = pos - static_cast<double>(left);
    out[i] = samples[left] + frac * (samples[right] - samples[left]);
  }
  return out;
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  binary::Reader in(bytes.data(), bytes.size(), "wav");
  if (in.remaining() < 12 || in.str(4) != "RIFF") in.fail("missing RIFF header");
  in.u32();
  if (in.str(4) != "WAVE") in.fail("missing WAVE tag");

  bool have_format = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (in.remaining() >= 8) {
    const std::string id = in.str(4);
    const std::uint32_t length = in.u32();
    const std::size_t body = in.position();
    if (id == "fmt ") {
      if (length < 16) in.fail("fmt chunk too short");
      std::uint16_t format = in.u16();
      channels = in.u16();
      rate = in.u32();
      in.u32();
      in.u16();
      bits = in.u16();
      if (format == 0xFFFE && length >= 40) {
        in.u16();
        in.u16();
        in.u32();
        format = in.u16();
      }
      if (format != 1) in.fail("unsupported encoding " + std::to_string(format) + " (PCM only)");
      if (bits != 16) in.fail("unsupported bit depth " + std::to_string(bits) + " (16-bit only)");
      if (channels != 1 && channels != 2) {
        in.fail("unsupported channel count " + std::to_string(channels));
      }
      if (rate == 0) in.fail("zero sample rate");
      have_format = true;
    } else if (id == "data") {
      if (!have_format) in.fail("data chunk before fmt chunk");
      const std::size_t frame_bytes = 2u * channels;
      const std::size_t usable = std::min<std::size_t>(length, in.remaining());
      const std::size_t frames = usable / frame_bytes;
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      clip.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
          acc += static_cast<std::int16_t>(in.u16()) / 32768.0;
        }
        clip.samples[i] = acc / channels;
      }
      if (clip.sample_rate != kSampleRate) {
        clip.samples = resample_linear(clip.samples, clip.sample_rate, kSampleRate);
        clip.sample_rate = kSampleRate;
      }
      return clip;
    }
    in.seek(std::min(bytes.size(), body + length + (length & 1u)));
  }
  in.fail("no data chunk");
}

AudioClip load_wav(const std::filesystem::path& path) {
  const auto bytes = binary::read_file(path);
  try {
    return decode_wav(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  std::vector<std::uint8_t> out;
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  binary::put_bytes(out, "RIFF");
  binary::put_u32(out, 36 + data_bytes);
  binary::put_bytes(out, "WAVEfmt ");
  binary::put_u32(out, 16);
  binary::put_u16(out, 1);
  binary::put_u16(out, 1);
  binary::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  binary::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  binary::put_u16(out, 2);
  binary::put_u16(out, 16);
  binary::put_bytes(out, "data");
  binary::put_u32(out, data_bytes);
  for (double s : clip.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32767.0);
    binary::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  return out;
}

void save_wav(const std::filesystem::path& path, const AudioClip& clip) {
  binary::write_file(path, encode_wav(clip));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

const MelFilterbank& mel_filterbank() {
  static const MelFilterbank bank = [] {
    MelFilterbank fb;
    fb.weights.assign(fb.bins * fb.fft_bins, 0.0);
    const double lo = hz_to_mel(kMelMinHz);
    const double hi = hz_to_mel(kMelMaxHz);
    std::vector<double> edges(fb.bins + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / (fb.bins + 1));
    }
    for (std::size_t m = 0; m < fb.bins; ++m) {
      const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
      fb.center_hz.push_back(center);
      for (std::size_t k = 0; k < fb.fft_bins; ++k) {
        const double f = static_cast<double>(k) * kSampleRate / kFftSize;
        double w = 0.0;
        if (f > left && f <= center) {
          w = (f - left) / (center - left);
        } else if (f > center && f < right) {
          w = (right - f) / (right - center);
        }
        fb.weights[m * fb.fft_bins + k] = w;
      }
    }
    return fb;
  }();
  return bank;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip) {
  if (clip.sample_rate != kSampleRate) {
    throw ContractError("mel_spectrogram expects 16 kHz audio, got " +
                        std::to_string(clip.sample_rate) + " Hz");
  }
  const std::size_t n = clip.samples.size();
  const std::size_t half = kWindowLength / 2;
  if (n <= half) {
    throw ContractError("clip of " + std::to_string(n) +
                        " samples is shorter than one analysis window");
  }
  for (double s : clip.samples) {
    if (!std::isfinite(s)) throw ContractError("clip contains non-finite samples");
  }

  // Reflection padding by half a window on both sides.
  std::vector<double> padded(n + 2 * half);
  for (std::size_t i = 0; i < half; ++i) {
    padded[i] = clip.samples[half - i];
    padded[n + half + i] = clip.samples[n - 2 - i];
  }
  std::copy(clip.samples.begin(), clip.samples.end(), padded.begin() + half);

  std::vector<double> window(kWindowLength);
  for (std::size_t i = 0; i < kWindowLength; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / kWindowLength);
  }

  const auto& bank = mel_filterbank();
  MelSpectrogram mel;
  mel.frames = (n + kHopLength - 1) / kHopLength;
  mel.values.assign(mel.frames * mel.bins, 0.0);

  std::vector<double> frame(kFftSize);
  std::vector<fftw_complex> spectrum(kFftSize / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(kFftSize), frame.data(),
                                spectrum.data(), FFTW_ESTIMATE);
  }
  std::vector<double> power(bank.fft_bins);
  for (std::size_t t = 0; t < mel.frames; ++t) {
    const double* src = padded.data() + t * kHopLength;
    for (std::size_t i = 0; i < kFftSize; ++i) frame[i] = src[i] * window[i];
    fftw_execute(plan);
    for (std::size_t k = 0; k < bank.fft_bins; ++k) {
      power[k] = spectrum[k][0] * spectrum[k][0] + spectrum[k][1] * spectrum[k][1];
    }
    for (std::size_t m = 0; m < mel.bins; ++m) {
      const double* w = bank.weights.data() + m * bank.fft_bins;
      double energy = 0.0;
      for (std::size_t k = 0; k < bank.fft_bins; ++k) energy += w[k] * power[k];
      mel.values[t * mel.bins + m] = std::log10(std::max(energy, kLogFloor));
    }
  }
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return mel;
}

Tensor MelWindow::tensor() const {
  return Tensor::from({1, kWindowFrames, kMelBins}, values);
}

std::size_t mel_center_for_frame(std::size_t frame_index, double fps) {
  const double mel_rate = static_cast<double>(kSampleRate) / kHopLength;
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(frame_index) * mel_rate / fps));
}

std::size_t video_frame_count(const MelSpectrogram& mel, double fps) {
  if (mel.frames == 0) return 0;
  const double mel_rate = static_cast<double>(kSampleRate) / kHopLength;
  std::size_t count = static_cast<std::size_t>(
      std::floor(static_cast<double>(mel.frames - 1) * fps / mel_rate)) + 1;
  while (count > 0 && mel_center_for_frame(count - 1, fps) >= mel.frames) --count;
  while (mel_center_for_frame(count, fps) < mel.frames) ++count;
  return count;
}

std::size_t window_start_for_frame(const MelSpectrogram& mel,
                                   std::size_t frame_index, double fps) {
  if (!(fps > 0.0)) throw ContractError("fps must be positive");
  if (mel.frames < kWindowFrames) {
    throw ContractError("spectrogram has " + std::to_string(mel.frames) +
                        " frames, fewer than one 16-frame window");
  }
  const std::size_t count = video_frame_count(mel, fps);
  if (frame_index >= count) {
    throw ContractError("video frame " + std::to_string(frame_index) +
                        " out of range; valid frames are [0, " +
                        std::to_string(count - 1) + "]");
  }
  const long center = static_cast<long>(mel_center_for_frame(frame_index, fps));
  const long start = center - static_cast<long>(kWindowFrames / 2);
  const long max_start = static_cast<long>(mel.frames - kWindowFrames);
  return static_cast<std::size_t>(std::clamp(start, 0L, max_start));
}

MelWindow window_for_frame(const MelSpectrogram& mel, std::size_t frame_index,
                           double fps) {
  const std::size_t start = window_start_for_frame(mel, frame_index, fps);
  MelWindow w;
  w.values.assign(mel.values.begin() + static_cast<long>(start * mel.bins),
                  mel.values.begin() + static_cast<long>((start + kWindowFrames) * mel.bins));
  return w;
}

void save_mel_matrix(const std::filesystem::path& path, const MelSpectrogram& mel) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMelMagic, kMelMagic + kMelMagicLength);
  binary::put_u32(out, static_cast<std::uint32_t>(mel.frames));
  binary::put_u32(out, static_cast<std::uint32_t>(mel.bins));
  for (double v : mel.values) binary::put_f32(out, static_cast<float>(v));
  binary::write_file(path, out);
}

MelSpectrogram load_mel_matrix(const std::filesystem::path& path) {
  const auto bytes = binary::read_file(path);
  binary::Reader in(bytes.data(), bytes.size(), path.string());
  if (in.remaining() < kMelMagicLength || in.str(kMelMagicLength) != kMelMagic) {
    in.fail("bad magic (expected G4GMEL1)");
  }
  MelSpectrogram mel;
  mel.frames = in.u32();
  mel.bins = in.u32();
  mel.values.resize(mel.frames * mel.bins);
  for (double& v : mel.values) v = in.f32();
  return mel;
}

void save_mel_text(const std::filesystem::path& path, const MelSpectrogram& mel) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(6) << std::fixed;
  for (std::size_t t = 0; t < mel.frames; ++t) {
    for (std::size_t m = 0; m < mel.bins; ++m) {
      if (m) out << ' ';
      out << mel.at(t, m);
    }
    out << '\n';
  }
}

}  // namespace talkface::audio
