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
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "talkface/config.hpp"
#include "talkface/error.hpp"
#include "talkface/model.hpp"

namespace talkface {

// Plain SGD or Adam over a fixed parameter list. Moment buffers are held
// per parameter position, so the list order must not change between steps.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, std::vector<Tensor> params);
  void step();
  void zero_grad();
  std::size_t steps_taken() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_;
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

std::vector<Tensor> parameters_of(const ParameterStore& store);

struct LossRow {
  std::size_t step = 0;
  double attribute = 0.0;       // L_v
  double perception = 0.0;      // L_p
  double discriminator = 0.0;   // L_D
  double generator = 0.0;       // L_G
  double reconstruction = 0.0;  // L_r
  double contrastive = 0.0;     // L_con
  double total = 0.0;
};

inline constexpr const char* kLossCsvHeader = "step,L_v,L_p,L_D,L_G,L_r,L_con,total";
std::string format_loss_row(const LossRow& row);

class DivergenceError : public ContractError {
 public:
  using ContractError::ContractError;
};

inline constexpr double kDivergenceFactor = 10.0;
inline constexpr std::size_t kDivergencePatience = 50;
// Aborts when the total stays above factor x its first value for
// `patience` consecutive steps.
class DivergenceGuard {
 public:
  explicit DivergenceGuard(double factor = kDivergenceFactor,
                           std::size_t patience = kDivergencePatience)
      : factor_(factor), patience_(patience) {}
  void observe(std::size_t step, double total);

 private:
  double factor_;
  std::size_t patience_;
  double initial_ = 0.0;
  bool started_ = false;
  std::size_t over_ = 0;
};

inline constexpr double kSyncStopFraction = 0.3;  // of log B

struct SyncPhaseResult {
  std::size_t steps = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct TrainResult {
  SyncPhaseResult sync;
  std::vector<LossRow> rows;
};

// Deterministic batch order: one seeded permutation per epoch, trailing
// partial batch dropped.
std::vector<std::vector<std::size_t>> batch_schedule(std::size_t n_samples,
                                                     std::size_t batch_size, std::size_t steps,
                                                     std::uint64_t seed);

// Phase 1 fits the contrastive heads on detached features from the untrained
// generator. Phase 2 freezes them and alternates critic and generator steps.
// Each loss row is passed to `on_row` as soon as it is computed.
TrainResult train(Model& model, std::span<const SceneSample> samples,
                  const PipelineConfig& config,
                  const std::function<void(const LossRow&)>& on_row = {});

struct TrainingSetScores {
  double masked_l1 = 0.0;
  double ssim = 0.0;
  double psnr = 0.0;
  double max_blend_residual = 0.0;  // max |final - composite|
};

TrainingSetScores evaluate_training_set(const Model& model, std::span<const SceneSample> samples,
                                        const PipelineConfig& config);

}  // namespace talkface
