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

#include "talkface/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "talkface/error.hpp"
#include "talkface/ops.hpp"

namespace talkface::metrics {

namespace {

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " differ");
  }
  if (a.rank() != 3) {
    throw ShapeError(std::string(op) + ": expected C x H x W images, got " +
                     shape_to_string(a.shape()));
  }
}

// Valid-region separable filtering of one h x w plane.
std::vector<double> filter_valid(const double* x, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size(), oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(h * ow), out(oh * ow);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += k[t] * x[i * w + j + t];
      rows[i * ow + j] = acc;
    }
  }
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += k[t] * rows[(i + t) * ow + j];
      out[i * ow + j] = acc;
    }
  }
  return out;
}

double unit_normalize(Embedding& e) {
  double mean = 0.0;
  for (double v : e) mean += v;
  mean /= static_cast<double>(e.size());
  double norm = 0.0;
  for (double& v : e) {
    v -= mean;
    norm += v * v;
  }
  norm = std::sqrt(norm);
  // A flat profile carries no timing information and maps to the origin.
  if (norm < 1e-12) {
    std::fill(e.begin(), e.end(), 0.0);
  } else {
    for (double& v : e) v /= norm;
  }
  return norm;
}

double distance(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw ShapeError("lse: embedding widths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) {
  require_same("mse", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b, double range) {
  const double m = mse(a, b);
  if (m < kMseFloor) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(range * range / m));
}

std::vector<double> ssim_kernel() {
  std::vector<double> k(kSsimWindow);
  const double half = static_cast<double>(kSsimWindow / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - half;
    k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

double ssim(const Tensor& a, const Tensor& b, double range) {
  require_same("ssim", a, b);
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ShapeError("ssim: images must be at least 11x11, got " + shape_to_string(a.shape()));
  }
  const auto k = ssim_kernel();
  const double c1 = (kSsimK1 * range) * (kSsimK1 * range);
  const double c2 = (kSsimK2 * range) * (kSsimK2 * range);
  const std::size_t plane = h * w;
  std::vector<double> aa(plane), bb(plane), ab(plane);
  double total = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* x = a.data().data() + ch * plane;
    const double* y = b.data().data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      aa[i] = x[i] * x[i];
      bb[i] = y[i] * y[i];
      ab[i] = x[i] * y[i];
    }
    const auto mu_a = filter_valid(x, h, w, k);
    const auto mu_b = filter_valid(y, h, w, k);
    const auto e_aa = filter_valid(aa.data(), h, w, k);
    const auto e_bb = filter_valid(bb.data(), h, w, k);
    const auto e_ab = filter_valid(ab.data(), h, w, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      sum += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(c);
}

ImageScores psnr_ssim_mse(const Tensor& a, const Tensor& b, double range) {
  return {psnr(a, b, range), ssim(a, b, range), mse(a, b)};
}

Embedding ProceduralSyncEmbedder::embed_visual(const std::vector<Tensor>& frames) const {
  if (frames.size() != kSyncFrames) {
    throw ShapeError("sync embedder: expected 5 frames, got " + std::to_string(frames.size()));
  }
  Embedding e;
  for (const Tensor& f : frames) {
    double dark = 0.0;
    for (double v : f.data()) dark += 1.0 - v;
    e.push_back(dark / static_cast<double>(f.size()));
  }
  unit_normalize(e);
  return e;
}

Embedding ProceduralSyncEmbedder::embed_audio(const audio::MelWindow& mel) const {
  if (mel.values.size() != audio::kWindowFrames * audio::kMelBins) {
    throw ShapeError("sync embedder: mel window must be 16 x 80");
  }
  // Five slices of 16/5 mel frames: one per video frame of the window.
  Embedding e(kSyncFrames, 0.0);
  std::vector<double> weight(kSyncFrames, 0.0);
  const double per = static_cast<double>(audio::kWindowFrames) / static_cast<double>(kSyncFrames);
  for (std::size_t t = 0; t < audio::kWindowFrames; ++t) {
    double power = 0.0;
    for (std::size_t b = 0; b < audio::kMelBins; ++b) {
      power += std::pow(10.0, mel.values[t * audio::kMelBins + b]);
    }
    const double rms = std::sqrt(power / static_cast<double>(audio::kMelBins));
    const std::size_t slot = std::min(kSyncFrames - 1, static_cast<std::size_t>((static_cast<double>(t) + 0.5) / per));
    e[slot] += rms;
    weight[slot] += 1.0;
  }
  for (std::size_t i = 0; i < kSyncFrames; ++i) e[i] /= weight[i];
  unit_normalize(e);
  return e;
}

SyncScores lse_from_embeddings(const std::vector<Embedding>& visual,
                               const std::vector<Embedding>& audio, int max_offset) {
  if (visual.size() != audio.size()) {
    throw ShapeError("lse: " + std::to_string(visual.size()) + " visual and " +
                     std::to_string(audio.size()) + " audio embeddings");
  }
  if (max_offset < 0) throw ContractError("lse: negative offset range");
  const std::size_t span = 2 * static_cast<std::size_t>(max_offset) + 1;
  if (visual.size() < span) {
    throw ContractError("lse: need at least " + std::to_string(span) +
                        " windows for offsets +/-" + std::to_string(max_offset) + ", got " +
                        std::to_string(visual.size()));
  }
  SyncScores s;
  std::vector<double> d(span);
  const auto m = static_cast<std::size_t>(max_offset);
  for (std::size_t t = m; t + m < visual.size(); ++t) {
    for (std::size_t k = 0; k < span; ++k) d[k] = distance(visual[t], audio[t + k - m]);
    s.distance += d[m];
    const double lo = *std::min_element(d.begin(), d.end());
    std::nth_element(d.begin(), d.begin() + static_cast<long>(m), d.end());
    s.confidence += d[m] - lo;  // span is odd: the median is the middle element
    ++s.windows;
  }
  s.distance /= static_cast<double>(s.windows);
  s.confidence /= static_cast<double>(s.windows);
  return s;
}

SyncScores lse(const std::vector<Tensor>& frames, const std::vector<audio::MelWindow>& mels,
               const SyncEmbedder& embedder, int max_offset) {
  if (frames.size() != mels.size()) {
    throw ShapeError("lse: " + std::to_string(frames.size()) + " frames but " +
                     std::to_string(mels.size()) + " mel windows");
  }
  const std::size_t half = kSyncFrames / 2;
  const std::size_t needed = kSyncFrames - 1 + 2 * static_cast<std::size_t>(std::max(max_offset, 0)) + 1;
  if (frames.size() < needed) {
    throw ContractError("lse: sequence of " + std::to_string(frames.size()) +
                        " frames is shorter than the " + std::to_string(needed) +
                        " needed for a 5-frame window and the offset range");
  }
  std::vector<Embedding> v, a;
  for (std::size_t t = half; t + half < frames.size(); ++t) {
    std::vector<Tensor> window(frames.begin() + static_cast<long>(t - half),
                               frames.begin() + static_cast<long>(t + half + 1));
    v.push_back(embedder.embed_visual(window));
    a.push_back(embedder.embed_audio(mels[t]));
  }
  return lse_from_embeddings(v, a, max_offset);
}

Tensor crop(const Tensor& frame, const CropBox& box) {
  if (frame.rank() != 3) throw ShapeError("crop: expected C x H x W, got " + shape_to_string(frame.shape()));
  const std::size_t c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
  const auto top = static_cast<std::size_t>(box.top * static_cast<double>(h));
  const auto bottom = static_cast<std::size_t>(box.bottom * static_cast<double>(h));
  const auto left = static_cast<std::size_t>(box.left * static_cast<double>(w));
  const auto right = static_cast<std::size_t>(box.right * static_cast<double>(w));
  if (!(top < bottom && bottom <= h && left < right && right <= w)) {
    throw ContractError("crop: box is empty or outside the frame");
  }
  std::vector<double> out;
  out.reserve(c * (bottom - top) * (right - left));
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = top; i < bottom; ++i) {
      for (std::size_t j = left; j < right; ++j) out.push_back(frame.data()[(k * h + i) * w + j]);
    }
  }
  return Tensor::from({c, bottom - top, right - left}, std::move(out));
}

double feature_distance(const Tensor& a, const Tensor& b, const FeatureExtractor& extractor) {
  require_same("feature_distance", a, b);
  const auto fa = extractor.stages(a);
  const auto fb = extractor.stages(b);
  double total = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    total += ops::mean(ops::abs(fa[i] - fb[i])).item();
  }
  return total / static_cast<double>(fa.size());
}

MetricReport evaluate_frames(const std::vector<Tensor>& generated,
                             const std::vector<Tensor>& reference) {
  if (generated.size() != reference.size()) {
    throw ContractError("evaluate: " + std::to_string(generated.size()) + " generated frames but " +
                        std::to_string(reference.size()) + " reference frames");
  }
  if (generated.empty()) throw ContractError("evaluate: no frames");
  MetricReport r;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    r.frames.push_back(psnr_ssim_mse(generated[i], reference[i]));
    r.mean.psnr += r.frames.back().psnr;
    r.mean.ssim += r.frames.back().ssim;
    r.mean.mse += r.frames.back().mse;
  }
  const double n = static_cast<double>(r.frames.size());
  r.mean.psnr /= n;
  r.mean.ssim /= n;
  r.mean.mse /= n;
  return r;
}

void write_report_csv(const std::filesystem::path& path, const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.precision(10);
  out << "frame,psnr,ssim,mse\n";
  for (std::size_t i = 0; i < report.frames.size(); ++i) {
    const auto& f = report.frames[i];
    out << i << ',' << f.psnr << ',' << f.ssim << ',' << f.mse << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_report_svg(const std::filesystem::path& path, const MetricReport& report) {
  const double width = 640, height = 320, pad = 40;
  const std::size_t n = report.frames.size();
  auto x_of = [&](std::size_t i) {
    return pad + (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.5) * (width - 2 * pad);
  };
  // PSNR on a 0..100 dB axis, SSIM on 0..1; both share the plot height.
  auto polyline = [&](auto value, double lo, double hi, const char* colour) {
    std::ostringstream s;
    s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      const double t = std::clamp((value(report.frames[i]) - lo) / (hi - lo), 0.0, 1.0);
      s << x_of(i) << ',' << (height - pad - t * (height - 2 * pad)) << ' ';
    }
    s << "\"/>\n";
    return s.str();
  };
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << pad << "\" y1=\"" << height - pad << "\" x2=\"" << width - pad << "\" y2=\""
      << height - pad << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << height - pad
      << "\" stroke=\"black\"/>\n"
      << polyline([](const ImageScores& s) { return s.psnr; }, 0.0, kPsnrCap, "steelblue")
      << polyline([](const ImageScores& s) { return s.ssim; }, 0.0, 1.0, "darkorange")
      << "<text x=\"" << pad << "\" y=\"20\" font-size=\"12\">PSNR (blue, 0-100 dB) and SSIM "
      << "(orange, 0-1) per frame</text>\n</svg>\n";
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace talkface::metrics
