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

#include "talkface/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "talkface/error.hpp"
#include "talkface/metrics.hpp"
#include "talkface/ops.hpp"

namespace talkface {

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, std::vector<Tensor> params)
    : kind_(kind), lr_(learning_rate), params_(std::move(params)) {
  if (!(learning_rate > 0.0)) throw ContractError("optimizer: learning rate must be positive");
  if (kind_ == OptimizerKind::kAdam) {
    for (const auto& p : params_) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Optimizer::step() {
  ++t_;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, double(t_)), c2 = 1.0 - std::pow(b2, double(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    const auto g = p.grad();
    if (g.empty()) continue;  // untouched this step
    auto w = p.mutable_data();
    if (kind_ == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * g[i];
      continue;
    }
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
}

std::vector<Tensor> parameters_of(const ParameterStore& store) {
  std::vector<Tensor> out;
  for (const auto& e : store.entries()) out.push_back(e.tensor);
  return out;
}

std::string format_loss_row(const LossRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", r.step, r.attribute,
                r.perception, r.discriminator, r.generator, r.reconstruction, r.contrastive,
                r.total);
  return buf;
}

void DivergenceGuard::observe(std::size_t step, double total) {
  if (!started_) {
    initial_ = total;
    started_ = true;
  }
  over_ = total > factor_ * initial_ ? over_ + 1 : 0;
  if (over_ >= patience_) {
    throw DivergenceError("training diverged: total loss above " + std::to_string(factor_) +
                          "x its initial value " + std::to_string(initial_) + " for " +
                          std::to_string(patience_) + " consecutive steps (step " +
                          std::to_string(step) + ")");
  }
}

std::vector<std::vector<std::size_t>> batch_schedule(std::size_t n_samples,
                                                     std::size_t batch_size, std::size_t steps,
                                                     std::uint64_t seed) {
  if (batch_size == 0 || n_samples < batch_size) {
    throw ContractError("batch_schedule: need at least one full batch (" +
                        std::to_string(n_samples) + " samples, batch " +
                        std::to_string(batch_size) + ")");
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> perm(n_samples);
  while (out.size() < steps) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    // Fisher-Yates with the project RNG so the order is platform independent.
    for (std::size_t i = n_samples - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    for (std::size_t b = 0; b + batch_size <= n_samples && out.size() < steps; b += batch_size) {
      out.emplace_back(perm.begin() + long(b), perm.begin() + long(b + batch_size));
    }
  }
  return out;
}

namespace {

std::vector<SceneSample> gather(std::span<const SceneSample> samples,
                                const std::vector<std::size_t>& idx) {
  std::vector<SceneSample> out;
  for (std::size_t i : idx) out.push_back(samples[i]);
  return out;
}

void check_finite(const std::string& what, double v, std::size_t step) {
  if (!std::isfinite(v)) {
    throw ContractError("training produced a non-finite " + what + " at step " +
                        std::to_string(step));
  }
}

SyncPhaseResult train_sync_heads(Model& model, std::span<const SceneSample> samples,
                                 const PipelineConfig& config) {
  // Features come from the generator at its initial state and are detached,
  // so only the heads move in this phase.
  std::vector<Tensor> visual, audio;
  for (std::size_t start = 0; start < samples.size(); start += config.batch_size) {
    const std::size_t end = std::min(samples.size(), start + config.batch_size);
    const std::size_t begin = end - start < 2 ? start - 1 : start;
    const ForwardResult r = forward(model, samples.subspan(begin, end - begin), config);
    for (std::size_t i = start - begin; i < end - begin; ++i) {
      visual.push_back(ops::global_avg_pool(r.samples[i].aligned).detach());
      audio.push_back(r.samples[i].audio.detach());
    }
  }

  model.generator_store.set_trainable(false);
  model.sync_store.set_trainable(true);
  Optimizer opt(config.optimizer, config.sync_learning_rate, parameters_of(model.sync_store));
  const double stop = kSyncStopFraction * std::log(double(config.batch_size));
  const auto schedule =
      batch_schedule(samples.size(), config.batch_size, config.sync_max_steps, config.seed + 101);
  SyncPhaseResult res;
  for (const auto& idx : schedule) {
    std::vector<Tensor> v, a;
    for (std::size_t i : idx) {
      v.push_back(visual[i]);
      a.push_back(audio[i]);
    }
    const ScorePair s =
        score_matrices(ops::stack_rows(v), ops::stack_rows(a), model.sync, config.temperature);
    const Tensor loss = contrastive_loss(similarity_distributions(s));
    const double value = loss.item();
    check_finite("contrastive loss", value, res.steps);
    if (res.steps == 0) res.initial_loss = value;
    res.final_loss = value;
    if (value < stop) break;
    opt.zero_grad();
    backward(loss);
    opt.step();
    ++res.steps;
  }
  model.generator_store.set_trainable(true);
  return res;
}

}  // namespace

TrainResult train(Model& model, std::span<const SceneSample> samples,
                  const PipelineConfig& config, const std::function<void(const LossRow&)>& on_row) {
  config.validate();
  if (samples.empty()) throw ContractError("train: dataset is empty");
  TrainResult result;
  const RandomConvExtractor extractor;
  const LossWeights weights = effective_weights(config);

  if (config.no_alignment) {
    // Without inter-modal alignment there is no sync expert to fit.
    model.sync_store.set_trainable(false);
  } else {
    result.sync = train_sync_heads(model, samples, config);
    model.sync_store.set_trainable(false);
  }

  Optimizer gen_opt(config.optimizer, config.learning_rate, parameters_of(model.generator_store));
  Optimizer critic_opt(config.optimizer, config.learning_rate,
                       parameters_of(model.critic_store));
  const auto schedule = batch_schedule(samples.size(), config.batch_size, config.steps, config.seed);

  DivergenceGuard guard;
  for (std::size_t step = 0; step < schedule.size(); ++step) {
    const std::vector<SceneSample> batch = gather(samples, schedule[step]);

    // Generator step with the critics frozen.
    model.critic_store.set_trainable(false);
    const ForwardResult fwd = forward(model, batch, config);
    const GeneratorLosses g = generator_losses(model, fwd, batch, config, extractor);
    check_finite("generator objective", g.objective.item(), step + 1);
    gen_opt.zero_grad();
    backward(g.objective);
    gen_opt.step();
    model.critic_store.set_trainable(true);

    // Critic step on the detached fakes of the same forward pass.
    const Tensor d_loss = discriminator_loss(model, fwd, batch);
    critic_opt.zero_grad();
    backward(d_loss);
    critic_opt.step();

    LossRow row;
    row.step = step + 1;
    row.attribute = g.terms.attribute.item();
    row.perception = g.terms.perception.item();
    row.discriminator = d_loss.item();
    row.generator = g.terms.adversarial.item();
    row.reconstruction = g.terms.reconstruction.item();
    row.contrastive = g.terms.contrastive.item();
    row.total = total_loss(LossComponents{row.attribute, row.perception,
                                          row.generator + row.discriminator, row.reconstruction,
                                          row.contrastive},
                           weights);
    result.rows.push_back(row);
    if (on_row) on_row(row);

    guard.observe(row.step, row.total);
  }
  return result;
}

TrainingSetScores evaluate_training_set(const Model& model, std::span<const SceneSample> samples,
                                        const PipelineConfig& config) {
  TrainingSetScores s;
  const double n = static_cast<double>(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += config.batch_size) {
    const std::size_t end = std::min(samples.size(), start + config.batch_size);
    // Pad a trailing single sample with its predecessor; only real rows count.
    const std::size_t begin = end - start < 2 ? start - 1 : start;
    const auto batch = samples.subspan(begin, end - begin);
    const ForwardResult r = forward(model, batch, config);
    for (std::size_t i = start - begin; i < batch.size(); ++i) {
      const Tensor& fin = r.samples[i].final_frame;
      const Tensor& truth = batch[i].truth_frame;
      s.masked_l1 += l1_reconstruction(fin, truth, model.masks).item() / n;
      const auto q = metrics::psnr_ssim_mse(fin, truth);
      s.ssim += q.ssim / n;
      s.psnr += q.psnr / n;
      const auto a = fin.data(), b = r.samples[i].composite.data();
      for (std::size_t k = 0; k < a.size(); ++k)
        s.max_blend_residual = std::max(s.max_blend_residual, std::abs(a[k] - b[k]));
    }
  }
  return s;
}

}  // namespace talkface
