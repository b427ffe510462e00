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

// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "talkface/alignment.hpp"
#include "talkface/audio.hpp"
#include "talkface/checkpoint.hpp"
#include "talkface/deformation.hpp"
#include "talkface/gradsuite.hpp"
#include "talkface/losses.hpp"
#include "talkface/metrics.hpp"
#include "talkface/model.hpp"
#include "talkface/ops.hpp"
#include "talkface/scene.hpp"
#include "talkface/train.hpp"

using namespace talkface;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Tensor uniform(Shape shape, Rng& rng, double lo, double hi) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

void gradient_suite() {
  const SuiteReport r = run_gradient_suite(5, 1e-4);
  double worst = 0.0;
  std::string worst_op;
  for (const auto& e : r.entries) {
    if (e.max_rel_error >= worst) {
      worst = e.max_rel_error;
      worst_op = e.op;
    }
  }
  report(1, r.passed() && r.seconds < 60.0,
         fmt("gradient suite: %zu operator entries x 5 seeds, worst %.2e (%s), %.1f s",
             r.entries.size(), worst, worst_op.c_str(), r.seconds));
}

void warp_exactness() {
  Rng rng(21);
  const Tensor f = uniform({5, 16, 16}, rng, -1, 1);
  const Tensor id = affine_warp(f, identity_coeffs(5));
  double id_err = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) id_err = std::max(id_err, std::abs(id.data()[i] - f.data()[i]));

  const auto p = affine_forward_point(std::numbers::pi / 2, 0, 0, 1, 1, 0);
  const double rot_err = std::max(std::abs(p[0]), std::abs(p[1] - 1.0));

  // Brute-force oracle: a one-pixel shift is an integer index offset.
  const std::size_t h = 12, w = 14;
  const Tensor g = uniform({3, h, w}, rng, 0, 1);
  const double dx = 2.0 / double(w - 1);
  const Tensor shifted = affine_warp(
      g, AffineCoeffSet{Tensor::zeros({3}), Tensor::full({3}, dx), Tensor::zeros({3}),
                        Tensor::full({3}, 1.0)});
  double shift_err = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 2; i < h - 2; ++i)
      for (std::size_t j = 2; j < w - 2; ++j)
        shift_err = std::max(shift_err, std::abs(shifted.at({c, i, j}) - g.at({c, i, j - 1})));
  report(2, id_err <= 1e-6 && rot_err < 1e-12 && shift_err < 1e-9,
         fmt("warp: identity err %.1e, rotation (1,0)->(%.3g,%.3g), one-pixel shift err %.1e",
             id_err, p[0], p[1], shift_err));
}

void adain_statistics() {
  Rng rng(5);
  double mean_err = 0.0, std_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = 1 + rng.index(6), h = 4 + rng.index(5), w = 4 + rng.index(5);
    const Tensor x = uniform({c, h, w}, rng, -3, 3);
    const Tensor s = uniform({c}, rng, -4, 4), m = uniform({c}, rng, -4, 4);
    const Tensor y = adain(x, s, m);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double mu = 0.0, var = 0.0;
      const double n = double(h * w);
      for (std::size_t k = 0; k < h * w; ++k) mu += y.data()[ch * h * w + k] / n;
      for (std::size_t k = 0; k < h * w; ++k) {
        const double d = y.data()[ch * h * w + k] - mu;
        var += d * d / n;
      }
      mean_err = std::max(mean_err, std::abs(mu - m.data()[ch]));
      std_err = std::max(std_err, std::abs(std::sqrt(var) - std::abs(s.data()[ch])));
    }
  }
  report(3, mean_err < 1e-5 && std_err < 1e-4,
         fmt("AdaIN on 20 random features: max mean err %.1e, max std err %.1e", mean_err, std_err));
}

double con_loss(const Tensor& scores, double tau) {
  return contrastive_loss(similarity_distributions(ScorePair{scores, scores, tau})).item();
}

Tensor diag_scores(std::size_t b, double diag, double off) {
  std::vector<double> v(b * b, off);
  for (std::size_t i = 0; i < b; ++i) v[i * b + i] = diag;
  return Tensor::from({b, b}, std::move(v));
}

void diagonal_contract() {
  double worst_ideal = 0.0, worst_uniform = 0.0;
  bool monotone = true;
  for (std::size_t b = 2; b <= 8; ++b) {
    worst_ideal = std::max(worst_ideal, con_loss(diag_scores(b, 1.0, 0.0), 0.07));
    worst_uniform = std::max(worst_uniform,
                             std::abs(con_loss(diag_scores(b, 0.3, 0.3), 0.07) - std::log(double(b))));
    double prev = INFINITY;
    for (int k = 0; k <= 40; ++k) {
      const double l = con_loss(diag_scores(b, -1.0 + 0.05 * k, 0.0), 0.07);
      if (!(l < prev)) monotone = false;
      prev = l;
    }
  }
  report(4, worst_ideal < 1e-3 && worst_uniform < 1e-6 && monotone,
         fmt("contrastive: ideal max %.2e, uniform |L-log B| max %.1e, monotone %s (B=2..8)",
             worst_ideal, worst_uniform, monotone ? "yes" : "no"));
}

void total_arithmetic() {
  const double t = total_loss(LossComponents{1, 1, 1, 1, 1}, LossWeights{});
  report(5, t == 15.0, fmt("weighted total of unit components = %.17g", t));
}

struct RunOutput {
  std::vector<LossRow> rows;
  std::vector<std::uint8_t> checkpoint;
  TrainingSetScores scores;
  double seconds = 0.0;
  Dataset dataset;
};

RunOutput run(const PipelineConfig& config) {
  RunOutput out;
  const auto t0 = std::chrono::steady_clock::now();
  out.dataset = generate_dataset(config, config.samples);
  Model model(config);
  out.rows = train(model, out.dataset.samples, config).rows;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.checkpoint = encode_checkpoint(std::as_const(model).stores());
  out.scores = evaluate_training_set(model, out.dataset.samples, config);
  return out;
}

std::string csv_of(const std::vector<LossRow>& rows) {
  std::string s = std::string(kLossCsvHeader) + "\n";
  for (const auto& r : rows) s += format_loss_row(r) + "\n";
  return s;
}

bool same_dataset(const Dataset& a, const Dataset& b) {
  if (a.samples.size() != b.samples.size() || a.clip.audio.samples != b.clip.audio.samples) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const auto &x = a.samples[i], &y = b.samples[i];
    if (x.frame_index != y.frame_index || x.mel.values != y.mel.values) return false;
    for (auto m : {&SceneSample::source_frame, &SceneSample::truth_frame, &SceneSample::masked_source,
                   &SceneSample::references, &SceneSample::landmark_map, &SceneSample::neighbor_frames}) {
      if (!bit_equal(x.*m, y.*m)) return false;
    }
  }
  return true;
}

void training_criteria() {
  PipelineConfig config;  // defaults: H=64, C=32, 16 samples, 200 steps
  const RunOutput full = run(config);
  const double first = full.rows.front().total, last = full.rows.back().total;
  const double drop = 1.0 - last / first;
  report(6, drop >= 0.5 && full.scores.masked_l1 < 0.05 && full.scores.ssim > 0.9 &&
                full.seconds < 300.0,
         fmt("overfit %zu steps: total %.4f -> %.4f (%.1f%% lower), masked L1 %.4f, SSIM %.4f, "
             "%.0f s",
             full.rows.size(), first, last, 100.0 * drop, full.scores.masked_l1, full.scores.ssim,
             full.seconds));

  PipelineConfig ablated = config;
  ablated.no_alignment = true;
  const RunOutput plain = run(ablated);
  const double residual = std::max(full.scores.max_blend_residual, plain.scores.max_blend_residual);
  report(7, full.scores.masked_l1 <= plain.scores.masked_l1 && residual <= kBlendResidualCap,
         fmt("ablation: masked L1 full %.4f vs no_alignment %.4f; max |final-composite| %.4f",
             full.scores.masked_l1, plain.scores.masked_l1, residual));

  const RunOutput again = run(config);
  const bool data_same = same_dataset(full.dataset, again.dataset);
  const bool csv_same = csv_of(full.rows) == csv_of(again.rows);
  const bool ckpt_same = full.checkpoint == again.checkpoint;
  report(10, data_same && csv_same && ckpt_same,
         fmt("determinism (seed %llu): dataset %s, loss CSV %s, checkpoint %s (%zu bytes)",
             static_cast<unsigned long long>(config.seed), data_same ? "identical" : "DIFFERS",
             csv_same ? "identical" : "DIFFERS", ckpt_same ? "identical" : "DIFFERS",
             full.checkpoint.size()));
}

// Windowed SSIM with explicit 11x11 Gaussian weights and centred moments.
double ssim_oracle(const Tensor& a, const Tensor& b) {
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  double g[11], gs = 0.0;
  for (int i = 0; i < 11; ++i) gs += (g[i] = std::exp(-double((i - 5) * (i - 5)) / 4.5));
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + 11 <= h; ++i)
      for (std::size_t j = 0; j + 11 <= w; ++j) {
        double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
        for (std::size_t u = 0; u < 11; ++u)
          for (std::size_t v = 0; v < 11; ++v) {
            const double wt = g[u] * g[v] / (gs * gs);
            ma += wt * a.at({ch, i + u, j + v});
            mb += wt * b.at({ch, i + u, j + v});
          }
        for (std::size_t u = 0; u < 11; ++u)
          for (std::size_t v = 0; v < 11; ++v) {
            const double wt = g[u] * g[v] / (gs * gs);
            const double da = a.at({ch, i + u, j + v}) - ma, db = b.at({ch, i + u, j + v}) - mb;
            va += wt * da * da;
            vb += wt * db * db;
            cov += wt * da * db;
          }
        sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    total += sum / double(count);
  }
  return total / double(c);
}

void metric_goldens() {
  // MSE exactly 0.01: every pixel off by 0.1.
  const Tensor a = Tensor::full({3, 16, 16}, 0.5), b = Tensor::full({3, 16, 16}, 0.6);
  const double p = metrics::psnr(a, b);
  Rng rng(8);
  double self = 1.0, oracle_err = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Tensor x = uniform({3, 20, 24}, rng, 0, 1);
    const Tensor y = ops::clamp(x + uniform({3, 20, 24}, rng, -0.2, 0.2), 0, 1);
    self = std::min(self, metrics::ssim(x, x));
    oracle_err = std::max(oracle_err, std::abs(metrics::ssim(x, y) - ssim_oracle(x, y)));
  }
  std::vector<metrics::Embedding> stream;
  for (std::size_t t = 0; t < 50; ++t) {
    metrics::Embedding e(90, 0.0);
    e[t + 20] = 1.0;
    stream.push_back(e);
  }
  const auto lse = metrics::lse_from_embeddings(stream, stream);
  report(8, std::abs(p - 20.0) < 1e-6 && self == 1.0 && oracle_err < 1e-6 &&
                std::abs(lse.distance) < 1e-6 && std::abs(lse.confidence - std::sqrt(2.0)) < 1e-6,
         fmt("metrics: PSNR %.9f dB, min SSIM(a,a) %.12f, SSIM oracle err %.1e, LSE-D %.1e, "
             "LSE-C %.9f",
             p, self, oracle_err, lse.distance, lse.confidence));
}

std::vector<std::size_t> dft_argmax(const audio::AudioClip& clip) {
  // Direct DFT of each Hann-windowed, reflect-padded frame, then HTK filters.
  const std::size_t n = clip.samples.size();
  auto sample = [&](long i) {
    if (i < 0) i = -i;
    if (i >= long(n)) i = 2 * long(n) - 2 - i;
    return clip.samples[std::size_t(i)];
  };
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::vector<double> edges;
  for (int i = 0; i < 82; ++i) edges.push_back(inv(mel(55.0) + (mel(7600.0) - mel(55.0)) * i / 81.0));
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < (n + 199) / 200; ++t) {
    std::vector<double> power(401);
    for (std::size_t k = 0; k <= 400; ++k) {
      double re = 0, im = 0;
      for (std::size_t j = 0; j < 800; ++j) {
        const double x = (0.5 - 0.5 * std::cos(2 * std::numbers::pi * j / 800.0)) *
                         sample(long(t * 200 + j) - 400);
        re += x * std::cos(2 * std::numbers::pi * k * j / 800.0);
        im -= x * std::sin(2 * std::numbers::pi * k * j / 800.0);
      }
      power[k] = re * re + im * im;
    }
    std::size_t best = 0;
    double best_e = -1;
    for (std::size_t m = 0; m < 80; ++m) {
      double e = 0;
      for (std::size_t k = 0; k <= 400; ++k) {
        const double f = k * 20.0;
        if (f > edges[m] && f <= edges[m + 1]) e += (f - edges[m]) / (edges[m + 1] - edges[m]) * power[k];
        if (f > edges[m + 1] && f < edges[m + 2]) e += (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]) * power[k];
      }
      if (e > best_e) {
        best_e = e;
        best = m;
      }
    }
    out.push_back(best);
  }
  return out;
}

void audio_contract() {
  audio::AudioClip tone;
  for (std::size_t i = 0; i < 3200; ++i)
    tone.samples.push_back(0.5 * std::sin(2 * std::numbers::pi * 440.0 * double(i) / 16000.0));
  const auto mel = audio::mel_spectrogram(tone);
  const bool shape_ok = mel.frames == 16 && mel.bins == 80;
  const auto oracle = dft_argmax(tone);
  std::size_t agree = 0;
  for (std::size_t t = 0; t < mel.frames && t < oracle.size(); ++t) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < 80; ++m)
      if (mel.at(t, m) > mel.at(t, best)) best = m;
    agree += best == oracle[t];
  }
  audio::AudioClip loud = tone;
  for (double& s : loud.samples) s *= 2.0;
  const auto mel2 = audio::mel_spectrogram(loud);
  double shift_err = 0.0;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < mel.values.size(); ++i) {
    if (mel.values[i] > std::log10(audio::kLogFloor) + 1e-9) {
      shift_err = std::max(shift_err, std::abs(mel2.values[i] - mel.values[i] - 2 * std::log10(2.0)));
      ++checked;
    }
  }
  report(9, shape_ok && agree == mel.frames && oracle.size() == mel.frames && shift_err < 1e-9 &&
                checked > 0,
         fmt("audio: 0.2 s -> %zu x %zu mel, argmax agrees with DFT oracle on %zu/%zu frames, "
             "x2 amplitude shift err %.1e over %zu entries",
             mel.frames, mel.bins, agree, mel.frames, shift_err, checked));
}

}  // namespace

int main() {
  gradient_suite();
  warp_exactness();
  adain_statistics();
  diagonal_contract();
  total_arithmetic();
  metric_goldens();
  audio_contract();
  training_criteria();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
