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
#include <string>
#include <vector>

#include "talkface/deformation.hpp"
#include "talkface/encoders.hpp"
#include "talkface/losses.hpp"

namespace talkface {

enum class OptimizerKind { kSgd, kAdam };

struct PipelineConfig {
  ModelDims dims;
  std::size_t batch_size = 4;
  // Adam at 1e-3: plain SGD at 1e-4 leaves the 200-step overfit run flat.
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double temperature = kDefaultTemperature;
  LossWeights weights;
  bool no_alignment = false;
  bool no_supervision = false;
  bool no_fusion = false;
  std::uint64_t seed = 7;

  std::size_t steps = 200;
  std::size_t samples = 16;
  std::size_t alignment_blocks = 1;
  std::size_t sync_max_steps = 500;
  double sync_learning_rate = 1e-2;
  WarpPadding padding = WarpPadding::kBorder;
  double mask_sigma = 2.0;  // face-mask blur, pixels

  void validate() const;
};

// Every key accepted by the config file and as a --key override.
const std::vector<std::string>& config_keys();

// Keys use underscores; hyphens are accepted and normalized.
std::string normalize_key(std::string key);
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& config, const std::string& key);

// Line-oriented "key = value" text with '#' comments.
PipelineConfig parse_config_text(const std::string& text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
std::string config_to_text(const PipelineConfig& config);

}  // namespace talkface
