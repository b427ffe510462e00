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

#include "talkface/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "talkface/error.hpp"
#include "talkface/nn.hpp"

namespace talkface {

namespace {

using Rgb = std::array<double, 3>;

struct Ellipse {
  double cx, cy, rx, ry;  // fractions of the frame
};

// Anti-aliased coverage of pixel centre (u, v) by an ellipse, using the
// radial signed distance approximation over one pixel.
double coverage(const Ellipse& e, double u, double v, double size) {
  const double dx = (u - e.cx) / e.rx, dy = (v - e.cy) / e.ry;
  const double r = std::sqrt(dx * dx + dy * dy);
  const double dist_px = (r - 1.0) * std::min(e.rx, e.ry) * size;
  return std::clamp(0.5 - dist_px, 0.0, 1.0);
}

void paint(Rgb& px, const Rgb& colour, double alpha) {
  for (int k = 0; k < 3; ++k) px[k] = (1.0 - alpha) * px[k] + alpha * colour[k];
}

struct Geometry {
  Ellipse hair, head, eye_l, eye_r, pupil_l, pupil_r, nose, lips, mouth;
};

Geometry geometry(const FaceState& s) {
  const double bx = s.bob_x, by = s.bob_y;
  const double eye_h = 0.03 * (1.0 - s.blink) + 0.004;
  const double open = std::clamp(s.mouth_open, 0.0, 1.0);
  Geometry g;
  g.hair = {0.5 + bx, 0.36 + by, 0.33, 0.30};
  g.head = {0.5 + bx, 0.52 + by, 0.28, 0.36};
  g.eye_l = {0.39 + bx, 0.44 + by, 0.06, eye_h};
  g.eye_r = {0.61 + bx, 0.44 + by, 0.06, eye_h};
  g.pupil_l = {0.39 + bx, 0.44 + by, 0.022, 0.022};
  g.pupil_r = {0.61 + bx, 0.44 + by, 0.022, 0.022};
  g.nose = {0.5 + bx, 0.57 + by, 0.025, 0.05};
  g.lips = {0.5 + bx, 0.72 + by, 0.11, 0.025 + 0.05 * open};
  g.mouth = {0.5 + bx, 0.72 + by, 0.085, 0.004 + 0.045 * open};
  return g;
}

std::vector<Landmark> ellipse_points(const Ellipse& e, std::size_t n, double size,
                                     double start = 0.0, double sweep = 2.0 * std::numbers::pi,
                                     bool closed = true) {
  std::vector<Landmark> out;
  const double denom = closed ? double(n) : double(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = start + sweep * double(k) / denom;
    out.push_back({(e.cx + e.rx * std::cos(a)) * size - 0.5, (e.cy + e.ry * std::sin(a)) * size - 0.5});
  }
  return out;
}

}  // namespace

Tensor render_face(const FaceState& state, std::size_t size) {
  if (size < 8) throw ContractError("render_face: frame size must be at least 8");
  const Geometry g = geometry(state);
  const double n = static_cast<double>(size);
  const Rgb hair{0.25, 0.16, 0.10}, skin{0.88, 0.70, 0.56}, sclera{0.95, 0.95, 0.95},
      pupil{0.10, 0.08, 0.08}, nose{0.78, 0.58, 0.46}, lips{0.72, 0.32, 0.32},
      mouth{0.30, 0.05, 0.08};
  std::vector<double> out(3 * size * size);
  for (std::size_t i = 0; i < size; ++i) {
    const double v = (static_cast<double>(i) + 0.5) / n;
    for (std::size_t j = 0; j < size; ++j) {
      const double u = (static_cast<double>(j) + 0.5) / n;
      Rgb px{0.30 + 0.25 * v + 0.05 * u, 0.40 + 0.22 * v, 0.60 + 0.15 * v};
      paint(px, hair, coverage(g.hair, u, v, n));
      paint(px, skin, coverage(g.head, u, v, n));
      const double el = coverage(g.eye_l, u, v, n), er = coverage(g.eye_r, u, v, n);
      paint(px, sclera, el);
      paint(px, sclera, er);
      // Pupils only show through the open eye.
      paint(px, pupil, el * coverage(g.pupil_l, u, v, n));
      paint(px, pupil, er * coverage(g.pupil_r, u, v, n));
      paint(px, nose, 0.6 * coverage(g.nose, u, v, n));
      paint(px, lips, coverage(g.lips, u, v, n));
      paint(px, mouth, coverage(g.mouth, u, v, n));
      for (std::size_t k = 0; k < 3; ++k) out[(k * size + i) * size + j] = px[k];
    }
  }
  return Tensor::from({3, size, size}, std::move(out));
}

std::vector<Landmark> face_landmarks(const FaceState& state, std::size_t size) {
  const Geometry g = geometry(state);
  const double n = static_cast<double>(size);
  const double bx = state.bob_x, by = state.bob_y;
  std::vector<Landmark> pts;
  // Jaw: 17 points along the lower half of the head outline.
  Ellipse jaw = g.head;
  jaw.rx *= 0.95;
  jaw.ry *= 0.95;
  for (const auto& p : ellipse_points(jaw, 17, n, 0.0, std::numbers::pi, false)) pts.push_back(p);
  std::reverse(pts.begin(), pts.end());
  // Brows: 5 + 5.
  for (double side : {-1.0, 1.0}) {
    for (int k = 0; k < 5; ++k) {
      const double t = (k - 2) / 2.0;
      pts.push_back({(0.5 + bx + side * 0.11 + 0.065 * t) * n - 0.5,
                     (0.38 + by + 0.012 * t * t) * n - 0.5});
    }
  }
  // Nose bridge (4) and base (5).
  for (int k = 0; k < 4; ++k) pts.push_back({(0.5 + bx) * n - 0.5, (0.46 + by + 0.035 * k) * n - 0.5});
  for (int k = 0; k < 5; ++k) pts.push_back({(0.46 + bx + 0.02 * k) * n - 0.5, (0.61 + by) * n - 0.5});
  // Eyes: 6 + 6.
  for (const Ellipse& e : {g.eye_l, g.eye_r}) {
    for (const auto& p : ellipse_points(e, 6, n, std::numbers::pi)) pts.push_back(p);
  }
  // Outer lip (12) and inner lip (8).
  for (const auto& p : ellipse_points(g.lips, 12, n, std::numbers::pi)) pts.push_back(p);
  for (const auto& p : ellipse_points(g.mouth, 8, n, std::numbers::pi)) pts.push_back(p);
  return pts;
}

Tensor landmark_heatmap(const std::vector<Landmark>& points, std::size_t size) {
  std::vector<double> map(size * size, 0.0);
  for (const auto& p : points) {
    const long x = std::lround(p[0]), y = std::lround(p[1]);
    if (x >= 0 && y >= 0 && x < long(size) && y < long(size)) {
      map[std::size_t(y) * size + std::size_t(x)] = 1.0;
    }
  }
  return Tensor::from({1, size, size}, std::move(map));
}

FaceBox lower_face_box(std::size_t size) {
  const double n = static_cast<double>(size);
  return {static_cast<std::size_t>(0.52 * n), static_cast<std::size_t>(0.22 * n),
          static_cast<std::size_t>(0.92 * n), static_cast<std::size_t>(0.78 * n)};
}

metrics::CropBox mouth_crop_box() { return {0.6, 0.3, 0.85, 0.7}; }

audio::AudioClip synthesize_speech(double seconds, std::uint64_t seed) {
  if (!(seconds > 0.0)) throw ContractError("synthesize_speech: duration must be positive");
  Rng rng(seed);
  const double sr = audio::kSampleRate;
  const auto total = static_cast<std::size_t>(std::ceil(seconds * sr));
  std::vector<double> x(total, 0.0);
  double t = rng.uniform(0.05, 0.2);
  while (t < seconds) {
    const double dur = rng.uniform(0.12, 0.3), gap = rng.uniform(0.03, 0.15);
    const double amp = rng.uniform(0.3, 0.9), f0 = rng.uniform(110.0, 220.0);
    const double glide = rng.uniform(-0.15, 0.15), formant = rng.uniform(500.0, 1500.0);
    const auto s0 = static_cast<std::size_t>(t * sr);
    const auto s1 = std::min(total, static_cast<std::size_t>((t + dur) * sr));
    double phase = 0.0;
    for (std::size_t s = s0; s < s1; ++s) {
      const double tau = (static_cast<double>(s) - static_cast<double>(s0)) / sr;
      const double env = std::pow(std::sin(std::numbers::pi * tau / dur), 2);
      const double f = f0 * (1.0 + glide * tau / dur);
      phase += 2.0 * std::numbers::pi * f / sr;
      x[s] += amp * env *
              (0.5 * std::sin(phase) + 0.25 * std::sin(2 * phase) + 0.15 * std::sin(3 * phase) +
               0.1 * std::sin(2.0 * std::numbers::pi * formant * tau));
    }
    t += dur + gap;
  }
  double peak = 0.0;
  for (double& v : x) {
    v += 1e-3 * rng.uniform(-1.0, 1.0);
    peak = std::max(peak, std::abs(v));
  }
  for (double& v : x) v *= 0.9 / peak;
  return {std::move(x), audio::kSampleRate};
}

std::vector<double> frame_rms(const audio::AudioClip& clip, std::size_t frames) {
  std::vector<double> out(frames);
  const long n = static_cast<long>(clip.samples.size());
  const long half = static_cast<long>(kSamplesPerFrame / 2);
  for (std::size_t f = 0; f < frames; ++f) {
    const long c = static_cast<long>(static_cast<double>(f) * kSamplesPerFrame);
    const long lo = std::clamp(c - half, 0L, n), hi = std::clamp(c + half, 0L, n);
    double s = 0.0;
    for (long k = lo; k < hi; ++k) s += clip.samples[std::size_t(k)] * clip.samples[std::size_t(k)];
    out[f] = hi > lo ? std::sqrt(s / double(hi - lo)) : 0.0;
  }
  return out;
}

SyntheticClip make_clip(const audio::AudioClip& clip, std::size_t size, std::size_t frames) {
  if (clip.sample_rate != audio::kSampleRate) {
    throw ContractError("make_clip: audio must be resampled to 16 kHz first");
  }
  const auto available = static_cast<std::size_t>(
      std::ceil(static_cast<double>(clip.samples.size()) / kSamplesPerFrame));
  if (available < frames) {
    throw ContractError("audio covers " + std::to_string(available) + " video frames at 25 fps; " +
                        std::to_string(frames) + " needed");
  }
  SyntheticClip out;
  out.audio = clip;
  out.mel = audio::mel_spectrogram(clip);
  out.rms = frame_rms(clip, frames);
  const double peak = std::max(*std::max_element(out.rms.begin(), out.rms.end()), 1e-12);
  for (std::size_t f = 0; f < frames; ++f) {
    FaceState s;
    const double fd = static_cast<double>(f);
    s.bob_x = 0.012 * std::sin(2.0 * std::numbers::pi * fd / 47.0);
    s.bob_y = 0.008 * std::sin(2.0 * std::numbers::pi * fd / 61.0 + 1.0);
    const std::size_t phase = f % 70;
    s.blink = phase == 31 ? 1.0 : (phase == 30 || phase == 32) ? 0.5 : 0.0;
    s.mouth_open = out.rms[f] / peak;
    out.states.push_back(s);
    out.frames.push_back(render_face(s, size));
  }
  return out;
}

std::size_t frames_required(std::size_t n_samples) {
  // First timestep <= 7, spacing <= 20, two neighbours after the last one.
  return 7 + 20 * (n_samples > 0 ? n_samples - 1 : 0) + 3;
}

Dataset generate_dataset(const PipelineConfig& config, std::size_t n_samples,
                         const std::optional<audio::AudioClip>& wav) {
  config.dims.validate();
  if (n_samples < config.batch_size) {
    throw ContractError("generate_dataset: " + std::to_string(n_samples) +
                        " samples is fewer than the batch size " + std::to_string(config.batch_size));
  }
  const std::size_t size = config.dims.image_size;
  Rng rng(config.seed);
  std::vector<std::size_t> steps;
  std::size_t t = 2 + rng.index(6);
  for (std::size_t i = 0; i < n_samples; ++i) {
    steps.push_back(t);
    t += 5 + rng.index(16);
  }
  const std::size_t needed = steps.back() + 3;

  Dataset ds;
  if (wav) {
    const auto available = static_cast<std::size_t>(
        std::ceil(static_cast<double>(wav->samples.size()) / kSamplesPerFrame));
    if (available < needed) {
      throw ContractError("generate_dataset: audio covers " + std::to_string(available) +
                          " video frames at 25 fps; " + std::to_string(needed) + " needed for " +
                          std::to_string(n_samples) + " samples");
    }
    ds.clip = make_clip(*wav, size, std::min(available, frames_required(n_samples)));
  } else {
    const std::size_t frames = frames_required(n_samples);
    const double seconds = static_cast<double>(frames) / audio::kVideoFps + 0.02;
    ds.clip = make_clip(synthesize_speech(seconds, config.seed * 7919 + 17), size, frames);
  }
  const std::size_t total = ds.clip.frames.size();
  const std::size_t plane = size * size;
  const metrics::CropBox mb = mouth_crop_box();
  const auto r0 = static_cast<std::size_t>(mb.top * double(size));
  const auto r1 = static_cast<std::size_t>(mb.bottom * double(size));
  const auto c0 = static_cast<std::size_t>(mb.left * double(size));
  const auto c1 = static_cast<std::size_t>(mb.right * double(size));

  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t ts = steps[i];
    SceneSample s;
    s.frame_index = ts;
    s.truth_frame = ds.clip.frames[ts];

    // Dubbing: the mouth region comes from another moment of the clip.
    const std::size_t shift = 5 + rng.index(16);
    std::size_t other;
    const bool forward = rng.index(2) == 0;
    if ((forward && ts + shift < total) || ts < shift) other = std::min(ts + shift, total - 1);
    else other = ts - shift;
    std::vector<double> src(s.truth_frame.data().begin(), s.truth_frame.data().end());
    const auto donor = ds.clip.frames[other].data();
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) src[k * plane + r * size + c] = donor[k * plane + r * size + c];
    s.source_frame = Tensor::from({3, size, size}, src);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t r = size / 2; r < size; ++r)
        for (std::size_t c = 0; c < size; ++c) src[k * plane + r * size + c] = 0.0;
    s.masked_source = Tensor::from({3, size, size}, std::move(src));

    // Five references from other timesteps; landmarks from the first.
    std::vector<double> refs;
    std::vector<std::size_t> used;
    while (used.size() < kReferenceCount) {
      const std::size_t r = rng.index(total);
      const bool near = r + 2 >= ts && r <= ts + 2;
      if (near || std::find(used.begin(), used.end(), r) != used.end()) continue;
      used.push_back(r);
      const auto f = ds.clip.frames[r].data();
      refs.insert(refs.end(), f.begin(), f.end());
    }
    s.references = Tensor::from({3 * kReferenceCount, size, size}, std::move(refs));
    s.landmark_map = landmark_heatmap(face_landmarks(ds.clip.states[used[0]], size), size);

    std::vector<double> nb;
    for (long d : {-2L, -1L, 1L, 2L}) {
      const auto f = ds.clip.frames[std::size_t(long(ts) + d)].data();
      nb.insert(nb.end(), f.begin(), f.end());
    }
    s.neighbor_frames = Tensor::from({12, size, size}, std::move(nb));
    s.mel = audio::window_for_frame(ds.clip.mel, ts);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace talkface
