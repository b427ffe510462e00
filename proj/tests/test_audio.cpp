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

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include "doctest.h"
#include "talkface/audio.hpp"
#include "talkface/error.hpp"
#include "../src/binary_io.hpp"

using namespace talkface;
using namespace talkface::audio;

namespace {

std::vector<std::uint8_t> make_wav(int rate, int channels, int bits,
                                   const std::vector<int>& samples,
                                   std::uint16_t format = 1) {
  std::vector<std::uint8_t> out;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * bits / 8);
  binary::put_bytes(out, "RIFF");
  binary::put_u32(out, 36 + data_bytes);
  binary::put_bytes(out, "WAVEfmt ");
  binary::put_u32(out, 16);
  binary::put_u16(out, format);
  binary::put_u16(out, static_cast<std::uint16_t>(channels));
  binary::put_u32(out, static_cast<std::uint32_t>(rate));
  binary::put_u32(out, static_cast<std::uint32_t>(rate * channels * bits / 8));
  binary::put_u16(out, static_cast<std::uint16_t>(channels * bits / 8));
  binary::put_u16(out, static_cast<std::uint16_t>(bits));
  binary::put_bytes(out, "data");
  binary::put_u32(out, data_bytes);
  for (int s : samples) {
    if (bits == 16) {
      binary::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
    } else {
      out.push_back(static_cast<std::uint8_t>(s));
    }
  }
  return out;
}

AudioClip tone(double hz, double amplitude, std::size_t n) {
  AudioClip clip;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    clip.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * hz * i / kSampleRate);
  }
  return clip;
}

// Independent oracle: naive DFT of each Hann-windowed reflected frame, then
// triangular HTK filters built from scratch.
std::vector<std::size_t> oracle_argmax_bins(const AudioClip& clip) {
  const std::size_t n = clip.samples.size();
  const std::size_t half = 400;
  auto sample = [&](long i) {
    if (i < 0) i = -i;
    if (i >= long(n)) i = 2 * long(n) - 2 - i;
    return clip.samples[std::size_t(i)];
  };
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::vector<double> edges;
  for (int i = 0; i < 82; ++i) edges.push_back(inv(mel(55.0) + (mel(7600.0) - mel(55.0)) * i / 81.0));

  std::vector<std::size_t> result;
  const std::size_t frames = (n + 199) / 200;
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<double> power(401);
    for (std::size_t k = 0; k <= 400; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t j = 0; j < 800; ++j) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * j / 800.0);
        const double x = w * sample(long(t * 200 + j) - long(half));
        re += x * std::cos(2.0 * std::numbers::pi * k * j / 800.0);
        im -= x * std::sin(2.0 * std::numbers::pi * k * j / 800.0);
      }
      power[k] = re * re + im * im;
    }
    std::size_t best = 0;
    double best_energy = -1.0;
    for (std::size_t m = 0; m < 80; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k <= 400; ++k) {
        const double f = k * 20.0;
        double w = 0.0;
        if (f > edges[m] && f <= edges[m + 1]) w = (f - edges[m]) / (edges[m + 1] - edges[m]);
        if (f > edges[m + 1] && f < edges[m + 2]) w = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
        e += w * power[k];
      }
      if (e > best_energy) {
        best_energy = e;
        best = m;
      }
    }
    result.push_back(best);
  }
  return result;
}

}  // namespace

TEST_CASE("one second of silence decodes to 16000 zeros") {
  auto clip = decode_wav(make_wav(16000, 1, 16, std::vector<int>(16000, 0)));
  CHECK(clip.sample_rate == 16000);
  REQUIRE(clip.samples.size() == 16000);
  for (double s : clip.samples) CHECK(s == 0.0);
}

TEST_CASE("8 kHz input is resampled to 16 kHz by linear interpolation") {
  std::vector<int> ramp(4000);
  for (int i = 0; i < 4000; ++i) ramp[i] = i % 2000;
  auto clip = decode_wav(make_wav(8000, 1, 16, ramp));
  CHECK(clip.sample_rate == 16000);
  REQUIRE(clip.samples.size() == 8000);
  // Oracle: output sample i sits at source position i / 2.
  for (std::size_t i = 0; i < 7998; ++i) {
    const std::size_t left = i / 2;
    const double expect = (i % 2 == 0) ? ramp[left] / 32768.0
                                       : 0.5 * (ramp[left] + ramp[left + 1]) / 32768.0;
    CHECK(clip.samples[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("stereo input is averaged to mono") {
  std::vector<int> interleaved;
  for (int i = 0; i < 100; ++i) {
    interleaved.push_back(1000);
    interleaved.push_back(-3000);
  }
  auto clip = decode_wav(make_wav(16000, 2, 16, interleaved));
  REQUIRE(clip.samples.size() == 100);
  for (double s : clip.samples) CHECK(s == doctest::Approx(-1000.0 / 32768.0));
}

TEST_CASE("malformed and unsupported WAV files are rejected") {
  std::vector<std::uint8_t> junk = {'R', 'I', 'F', 'X', 0, 0, 0, 0};
  CHECK_THROWS_AS(decode_wav(junk), IoError);
  CHECK_THROWS_AS(decode_wav(make_wav(16000, 1, 8, std::vector<int>(10, 128))), IoError);
  CHECK_THROWS_AS(decode_wav(make_wav(16000, 1, 16, std::vector<int>(10, 0), 3)), IoError);
  CHECK_THROWS_AS(load_wav("/nonexistent/file.wav"), IoError);
}

TEST_CASE("WAV encode/decode preserves 16-bit samples") {
  AudioClip clip = tone(300.0, 0.5, 1000);
  auto decoded = decode_wav(encode_wav(clip));
  REQUIRE(decoded.samples.size() == clip.samples.size());
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    CHECK(std::abs(decoded.samples[i] - clip.samples[i]) < 1.0 / 16000.0);
  }
}

TEST_CASE("silence maps to the log floor") {
  AudioClip clip;
  clip.samples.assign(3200, 0.0);
  auto mel = mel_spectrogram(clip);
  for (double v : mel.values) CHECK(v == doctest::Approx(-5.0).epsilon(1e-15));
}

TEST_CASE("0.2 s of audio yields exactly 16 x 80 mel frames") {
  auto mel = mel_spectrogram(tone(440.0, 0.5, 3200));
  CHECK(mel.frames == 16);
  CHECK(mel.bins == 80);
  CHECK(mel.values.size() == 16 * 80);
}

TEST_CASE("440 Hz tone peaks in the bin selected by the direct-DFT oracle") {
  const AudioClip clip = tone(440.0, 0.5, 3200);
  const auto mel = mel_spectrogram(clip);
  const auto oracle = oracle_argmax_bins(clip);
  REQUIRE(oracle.size() == mel.frames);
  const auto& bank = mel_filterbank();
  std::size_t nearest = 0;
  for (std::size_t m = 1; m < 80; ++m) {
    if (std::abs(bank.center_hz[m] - 440.0) < std::abs(bank.center_hz[nearest] - 440.0)) nearest = m;
  }
  for (std::size_t t = 0; t < mel.frames; ++t) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < 80; ++m) {
      if (mel.at(t, m) > mel.at(t, best)) best = m;
    }
    CHECK(best == oracle[t]);
    // Edge frames see the reflection seam; the nearest-centre rule is
    // asserted on interior frames only.
    if (t >= 2 && t + 2 < mel.frames) CHECK(best == nearest);
  }
}

TEST_CASE("doubling amplitude shifts above-floor entries by log10(4)") {
  const AudioClip a = tone(523.0, 0.2, 4000);
  AudioClip b = a;
  for (double& s : b.samples) s *= 2.0;
  const auto ma = mel_spectrogram(a), mb = mel_spectrogram(b);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < ma.values.size(); ++i) {
    if (ma.values[i] > std::log10(kLogFloor) + 1e-9) {
      CHECK(std::abs(mb.values[i] - ma.values[i] - 2.0 * std::log10(2.0)) < 1e-9);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("mel spectrogram is deterministic and rejects bad input") {
  const AudioClip a = tone(300.0, 0.3, 5000);
  CHECK(mel_spectrogram(a).values == mel_spectrogram(a).values);
  AudioClip short_clip;
  short_clip.samples.assign(300, 0.0);
  CHECK_THROWS_AS(mel_spectrogram(short_clip), ContractError);
  AudioClip wrong_rate = a;
  wrong_rate.sample_rate = 8000;
  CHECK_THROWS_AS(mel_spectrogram(wrong_rate), ContractError);
}

TEST_CASE("window_for_frame timing") {
  const auto mel = mel_spectrogram(tone(200.0, 0.3, 16000 * 3));
  CHECK(window_start_for_frame(mel, 0) == 0);
  CHECK(window_start_for_frame(mel, 25) == 72);
  const auto w = window_for_frame(mel, 25);
  REQUIRE(w.values.size() == 16 * 80);
  CHECK(w.values[0] == mel.at(72, 0));
  CHECK(w.values[15 * 80 + 79] == mel.at(87, 79));
  CHECK(w.tensor().shape() == Shape{1, 16, 80});

  const std::size_t count = video_frame_count(mel);
  for (std::size_t f = 3; f + 4 < count; ++f) {
    const auto d = window_start_for_frame(mel, f + 1) - window_start_for_frame(mel, f);
    CHECK((d == 3 || d == 4));
  }
  try {
    window_for_frame(mel, count + 5);
    FAIL("expected out-of-range error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("[0, " + std::to_string(count - 1) + "]") !=
          std::string::npos);
  }
}

TEST_CASE("mel matrix file round trip and header layout") {
  const auto mel = mel_spectrogram(tone(440.0, 0.5, 3200));
  const auto path = std::filesystem::temp_directory_path() / "talkface_test.mel";
  save_mel_matrix(path, mel);
  const auto bytes = binary::read_file(path);
  REQUIRE(bytes.size() == 7 + 8 + 16 * 80 * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 7) == "G4GMEL1");
  CHECK(bytes[7] == 16);
  CHECK(bytes[11] == 80);
  const auto back = load_mel_matrix(path);
  CHECK(back.frames == 16);
  for (std::size_t i = 0; i < mel.values.size(); ++i) {
    CHECK(back.values[i] == static_cast<double>(static_cast<float>(mel.values[i])));
  }
  std::filesystem::remove(path);
}
