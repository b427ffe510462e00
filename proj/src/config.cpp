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

#include "talkface/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "talkface/error.hpp"

namespace talkface {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ContractError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || !std::isfinite(out)) {
    throw ContractError("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ContractError("config: '" + key + "' expects true/false, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

void PipelineConfig::validate() const {
  dims.validate();
  weights.validate();
  if (batch_size < 2) throw ContractError("config: batch_size must be >= 2 for the contrastive terms");
  if (samples < batch_size) throw ContractError("config: samples must be >= batch_size");
  if (!(learning_rate > 0.0)) throw ContractError("config: learning_rate must be positive");
  if (!(sync_learning_rate > 0.0)) throw ContractError("config: sync_learning_rate must be positive");
  if (!(temperature > 0.0)) throw ContractError("config: temperature must be positive");
  if (!(mask_sigma > 0.0)) throw ContractError("config: mask_sigma must be positive");
  if (alignment_blocks == 0) throw ContractError("config: alignment_blocks must be >= 1");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "image_size",     "channels",        "feature_dim",   "embed_dim",
      "batch_size",     "learning_rate",   "optimizer",     "temperature",
      "lambda_v",       "lambda_p",        "lambda_gan",    "lambda_r",
      "lambda_con",     "no_alignment",    "no_supervision", "no_fusion",
      "seed",           "steps",           "samples",       "alignment_blocks",
      "sync_max_steps", "sync_learning_rate", "padding",    "mask_sigma"};
  return keys;
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

void set_config_value(PipelineConfig& c, const std::string& raw_key, const std::string& raw) {
  const std::string key = normalize_key(raw_key);
  const std::string v = trim(raw);
  if (key == "image_size") c.dims.image_size = parse_size(key, v);
  else if (key == "channels") c.dims.channels = parse_size(key, v);
  else if (key == "feature_dim") c.dims.feature_dim = parse_size(key, v);
  else if (key == "embed_dim") c.dims.embed_dim = parse_size(key, v);
  else if (key == "batch_size") c.batch_size = parse_size(key, v);
  else if (key == "learning_rate") c.learning_rate = parse_double(key, v);
  else if (key == "optimizer") {
    if (v == "sgd") c.optimizer = OptimizerKind::kSgd;
    else if (v == "adam") c.optimizer = OptimizerKind::kAdam;
    else throw ContractError("config: optimizer must be sgd or adam, got '" + v + "'");
  }
  else if (key == "temperature") c.temperature = parse_double(key, v);
  else if (key == "lambda_v") c.weights.attribute = parse_double(key, v);
  else if (key == "lambda_p") c.weights.perception = parse_double(key, v);
  else if (key == "lambda_gan") c.weights.adversarial = parse_double(key, v);
  else if (key == "lambda_r") c.weights.reconstruction = parse_double(key, v);
  else if (key == "lambda_con") c.weights.contrastive = parse_double(key, v);
  else if (key == "no_alignment") c.no_alignment = parse_bool(key, v);
  else if (key == "no_supervision") c.no_supervision = parse_bool(key, v);
  else if (key == "no_fusion") c.no_fusion = parse_bool(key, v);
  else if (key == "seed") c.seed = parse_size(key, v);
  else if (key == "steps") c.steps = parse_size(key, v);
  else if (key == "samples") c.samples = parse_size(key, v);
  else if (key == "alignment_blocks") c.alignment_blocks = parse_size(key, v);
  else if (key == "sync_max_steps") c.sync_max_steps = parse_size(key, v);
  else if (key == "sync_learning_rate") c.sync_learning_rate = parse_double(key, v);
  else if (key == "padding") {
    if (v == "border") c.padding = WarpPadding::kBorder;
    else if (v == "zeros") c.padding = WarpPadding::kZeros;
    else throw ContractError("config: padding must be border or zeros, got '" + v + "'");
  }
  else if (key == "mask_sigma") c.mask_sigma = parse_double(key, v);
  else throw ContractError("config: unknown key '" + raw_key + "'");
}

std::string get_config_value(const PipelineConfig& c, const std::string& raw_key) {
  const std::string key = normalize_key(raw_key);
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  if (key == "image_size") return std::to_string(c.dims.image_size);
  if (key == "channels") return std::to_string(c.dims.channels);
  if (key == "feature_dim") return std::to_string(c.dims.feature_dim);
  if (key == "embed_dim") return std::to_string(c.dims.embed_dim);
  if (key == "batch_size") return std::to_string(c.batch_size);
  if (key == "learning_rate") return fmt(c.learning_rate);
  if (key == "optimizer") return c.optimizer == OptimizerKind::kSgd ? "sgd" : "adam";
  if (key == "temperature") return fmt(c.temperature);
  if (key == "lambda_v") return fmt(c.weights.attribute);
  if (key == "lambda_p") return fmt(c.weights.perception);
  if (key == "lambda_gan") return fmt(c.weights.adversarial);
  if (key == "lambda_r") return fmt(c.weights.reconstruction);
  if (key == "lambda_con") return fmt(c.weights.contrastive);
  if (key == "no_alignment") return b(c.no_alignment);
  if (key == "no_supervision") return b(c.no_supervision);
  if (key == "no_fusion") return b(c.no_fusion);
  if (key == "seed") return std::to_string(c.seed);
  if (key == "steps") return std::to_string(c.steps);
  if (key == "samples") return std::to_string(c.samples);
  if (key == "alignment_blocks") return std::to_string(c.alignment_blocks);
  if (key == "sync_max_steps") return std::to_string(c.sync_max_steps);
  if (key == "sync_learning_rate") return fmt(c.sync_learning_rate);
  if (key == "padding") return c.padding == WarpPadding::kBorder ? "border" : "zeros";
  if (key == "mask_sigma") return fmt(c.mask_sigma);
  throw ContractError("config: unknown key '" + raw_key + "'");
}

PipelineConfig parse_config_text(const std::string& text, PipelineConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ContractError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ContractError& e) {
      throw ContractError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

std::string config_to_text(const PipelineConfig& config) {
  std::string out;
  for (const auto& key : config_keys()) out += key + " = " + get_config_value(config, key) + "\n";
  return out;
}

}  // namespace talkface
