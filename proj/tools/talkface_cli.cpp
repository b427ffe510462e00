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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "talkface/audio.hpp"
#include "talkface/checkpoint.hpp"
#include "talkface/config.hpp"
#include "talkface/deformation.hpp"
#include "talkface/error.hpp"
#include "talkface/gradsuite.hpp"
#include "talkface/image_io.hpp"
#include "talkface/metrics.hpp"
#include "talkface/model.hpp"
#include "talkface/scene.hpp"
#include "talkface/train.hpp"

namespace fs = std::filesystem;
using namespace talkface;

namespace {

// --config FILE plus one --key VALUE option per config key.
struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "line-oriented 'key = value' config file");
    for (const auto& key : config_keys()) {
      std::string names = "--" + key;
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      if (dashed != key) names += ",--" + dashed;
      options[key] = app->add_option(names, values[key], "config override");
    }
  }

  PipelineConfig resolve() const {
    PipelineConfig c = file.empty() ? PipelineConfig{} : load_config(file);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) set_config_value(c, key, values.at(key));
    }
    c.validate();
    return c;
  }
};

void save_frames(const fs::path& dir, const std::vector<Tensor>& frames) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    image::save_pnm(dir / image::frame_file_name(i, frames[i].dim(0)), frames[i]);
  }
}

std::vector<Tensor> load_frames(const fs::path& dir) {
  std::vector<Tensor> out;
  for (const auto& p : image::list_frames(dir)) out.push_back(image::load_pnm(p));
  if (out.empty()) throw IoError("no PGM/PPM frames in '" + dir.string() + "'");
  return out;
}

std::optional<audio::AudioClip> maybe_wav(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return audio::load_wav(path);
}

int cmd_gradcheck(std::size_t seeds, double tolerance) {
  const SuiteReport r = run_gradient_suite(seeds, tolerance);
  for (const auto& e : r.entries) {
    std::printf("%-30s max_rel_error %.3e  %s\n", e.op.c_str(), e.max_rel_error,
                e.passed ? "ok" : "FAIL");
    if (!e.passed) std::printf("    %s\n", e.worst.c_str());
  }
  std::printf("%zu operators, %zu seeds each, tolerance %.1e, %.2f s: %s\n", r.entries.size(),
              seeds, tolerance, r.seconds, r.passed() ? "PASS" : "FAIL");
  return r.passed() ? 0 : 1;
}

int cmd_melspec(const std::string& wav, const std::string& out, const std::string& text) {
  const auto mel = audio::mel_spectrogram(audio::load_wav(wav));
  audio::save_mel_matrix(out, mel);
  if (!text.empty()) audio::save_mel_text(text, mel);
  std::printf("%zu mel frames x %zu bins -> %s\n", mel.frames, mel.bins, out.c_str());
  return 0;
}

int cmd_synth(const PipelineConfig& config, const fs::path& out, const std::string& wav) {
  const Dataset ds = generate_dataset(config, config.samples, maybe_wav(wav));
  fs::create_directories(out);
  save_frames(out / "frames", ds.clip.frames);
  audio::save_wav(out / "audio.wav", ds.clip.audio);
  audio::save_mel_matrix(out / "mel.bin", ds.clip.mel);
  std::ofstream index(out / "samples.csv");
  index << "sample,frame_index\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const SceneSample& s = ds.samples[i];
    index << i << ',' << s.frame_index << '\n';
    const fs::path dir = out / "samples" / std::to_string(i);
    fs::create_directories(dir);
    image::save_pnm(dir / "source.ppm", s.source_frame);
    image::save_pnm(dir / "truth.ppm", s.truth_frame);
    image::save_pnm(dir / "masked_source.ppm", s.masked_source);
    image::save_pnm(dir / "landmarks.pgm", s.landmark_map);
    for (std::size_t r = 0; r < kReferenceCount; ++r) {
      image::save_pnm(dir / ("reference" + std::to_string(r) + ".ppm"),
                      ops::slice(s.references, 0, 3 * r, 3 * r + 3));
    }
  }
  std::ofstream(out / "config.txt") << config_to_text(config);
  std::printf("%zu samples from a %zu-frame clip -> %s\n", ds.samples.size(),
              ds.clip.frames.size(), out.string().c_str());
  return 0;
}

int cmd_train(const PipelineConfig& config, const fs::path& out, const std::string& wav) {
  const Dataset ds = generate_dataset(config, config.samples, maybe_wav(wav));
  fs::create_directories(out);
  std::ofstream csv(out / "losses.csv");
  if (!csv) throw IoError("cannot write '" + (out / "losses.csv").string() + "'");
  csv << kLossCsvHeader << '\n';
  Model model(config);
  const TrainResult r = train(model, ds.samples, config, [&](const LossRow& row) {
    csv << format_loss_row(row) << '\n';
    csv.flush();
    if (row.step == 1 || row.step % 20 == 0) {
      std::printf("step %4zu  total %.5f  L_r %.5f  L_con %.5f\n", row.step, row.total,
                  row.reconstruction, row.contrastive);
      std::fflush(stdout);
    }
  });
  save_checkpoint(out / "checkpoint.bin", std::as_const(model).stores());
  std::ofstream(out / "config.txt") << config_to_text(config);

  std::vector<Tensor> generated, truth;
  for (std::size_t start = 0; start < ds.samples.size(); start += config.batch_size) {
    const std::size_t end = std::min(ds.samples.size(), start + config.batch_size);
    const std::size_t begin = end - start < 2 ? start - 1 : start;
    const ForwardResult f = forward(model, std::span(ds.samples).subspan(begin, end - begin), config);
    for (std::size_t i = start - begin; i < end - begin; ++i) {
      generated.push_back(f.samples[i].final_frame);
      truth.push_back(ds.samples[begin + i].truth_frame);
    }
  }
  save_frames(out / "generated", generated);
  save_frames(out / "truth", truth);
  const auto s = evaluate_training_set(model, ds.samples, config);
  std::printf("sync phase: %zu steps, L_con %.4f -> %.4f\n", r.sync.steps, r.sync.initial_loss,
              r.sync.final_loss);
  if (!r.rows.empty()) {
    std::printf("total loss %.5f -> %.5f (%.1f%% lower)\n", r.rows.front().total,
                r.rows.back().total, 100.0 * (1.0 - r.rows.back().total / r.rows.front().total));
  }
  std::printf("training set: masked L1 %.5f  SSIM %.4f  PSNR %.2f dB\n", s.masked_l1, s.ssim,
              s.psnr);
  return 0;
}

int cmd_eval(const std::string& gen_dir, const std::string& ref_dir, const std::string& wav,
             const std::string& out, const std::string& plot) {
  const auto generated = load_frames(gen_dir), reference = load_frames(ref_dir);
  metrics::MetricReport report = metrics::evaluate_frames(generated, reference);
  if (!wav.empty()) {
    const auto mel = audio::mel_spectrogram(audio::load_wav(wav));
    if (generated.size() < 2 * metrics::kSyncOffset + metrics::kSyncFrames) {
      std::printf("LSE skipped: %zu frames, at least %zu needed\n", generated.size(),
                  std::size_t(2 * metrics::kSyncOffset + metrics::kSyncFrames));
    } else {
      std::vector<audio::MelWindow> windows;
      for (std::size_t i = 0; i < generated.size(); ++i)
        windows.push_back(audio::window_for_frame(mel, i));
      report.sync = metrics::lse(generated, windows, metrics::ProceduralSyncEmbedder{});
      report.has_sync = true;
    }
  }
  metrics::write_report_csv(out, report);
  if (!plot.empty()) metrics::write_report_svg(plot, report);
  std::printf("%zu frames  PSNR %.4f dB  SSIM %.4f  MSE %.6f\n", report.frame_count(),
              report.mean.psnr, report.mean.ssim, report.mean.mse);
  if (report.has_sync) {
    std::printf("LSE-D %.4f  LSE-C %.4f  (%zu windows)\n", report.sync.distance,
                report.sync.confidence, report.sync.windows);
  }
  return 0;
}

int cmd_warp_demo(const PipelineConfig& config, const fs::path& out, double theta, double tx,
                  double ty, double scale) {
  FaceState face;
  face.mouth_open = 0.5;
  const Tensor before = render_face(face, config.dims.image_size);
  const AffineCoeffSet c{Tensor::full({3}, theta), Tensor::full({3}, tx), Tensor::full({3}, ty),
                         Tensor::full({3}, scale)};
  const Tensor after = affine_warp(before, c, config.padding);
  fs::create_directories(out);
  image::save_pnm(out / "before.ppm", before);
  image::save_pnm(out / "after.ppm", ops::clamp(after, 0.0, 1.0));
  std::printf("theta %.4f tx %.4f ty %.4f scale %.4f -> %s\n", theta, tx, ty, scale,
              out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"talkface: audio-driven talking-face pipeline"};
  app.require_subcommand(1);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference suite over every operator");
  std::size_t seeds = kSuiteSeeds;
  double tolerance = kSuiteTolerance;
  gradcheck->add_option("--seeds", seeds, "fixtures per operator");
  gradcheck->add_option("--tolerance", tolerance, "max relative error");

  auto* melspec = app.add_subcommand("melspec", "log-mel matrix of a 16-bit PCM WAV");
  std::string mel_in, mel_out, mel_text;
  melspec->add_option("--audio", mel_in, "input WAV")->required();
  melspec->add_option("--out", mel_out, "binary matrix output")->required();
  melspec->add_option("--text", mel_text, "optional text dump");

  std::string out_dir, wav;
  auto* synth = app.add_subcommand("synth-data", "procedural dataset, clip frames and audio");
  ConfigOptions synth_cfg;
  synth_cfg.attach(synth);
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--audio", wav, "drive the face with this WAV instead of synthetic speech");

  auto* train_cmd = app.add_subcommand("train", "two-phase training on a procedural dataset");
  ConfigOptions train_cfg;
  train_cfg.attach(train_cmd);
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  train_cmd->add_option("--audio", wav, "drive the face with this WAV instead of synthetic speech");

  auto* eval = app.add_subcommand("eval", "PSNR/SSIM/MSE and optional LSE over frame folders");
  std::string gen_dir, ref_dir, eval_audio, report, plot;
  eval->add_option("--generated", gen_dir, "generated frames")->required();
  eval->add_option("--reference", ref_dir, "reference frames")->required();
  eval->add_option("--audio", eval_audio, "audio for LSE (needs >= 35 frames)");
  eval->add_option("--out", report, "report CSV")->required();
  eval->add_option("--plot", plot, "per-frame SVG plot");

  auto* warp = app.add_subcommand("warp-demo", "before/after images of one affine warp");
  ConfigOptions warp_cfg;
  warp_cfg.attach(warp);
  double theta = 0.2, tx = 0.1, ty = -0.05, scale = 1.1;
  warp->add_option("--out", out_dir, "output directory")->required();
  warp->add_option("--theta", theta, "rotation, radians");
  warp->add_option("--tx", tx, "translation x, normalized units");
  warp->add_option("--ty", ty, "translation y, normalized units");
  warp->add_option("--scale", scale, "scale factor (> 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gradcheck) return cmd_gradcheck(seeds, tolerance);
    if (*melspec) return cmd_melspec(mel_in, mel_out, mel_text);
    if (*synth) return cmd_synth(synth_cfg.resolve(), out_dir, wav);
    if (*train_cmd) return cmd_train(train_cfg.resolve(), out_dir, wav);
    if (*eval) return cmd_eval(gen_dir, ref_dir, eval_audio, report, plot);
    if (*warp) return cmd_warp_demo(warp_cfg.resolve(), out_dir, theta, tx, ty, scale);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
