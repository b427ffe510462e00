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

#include "talkface/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "talkface/error.hpp"

namespace talkface {

double Rng::uniform() {
  // 53 random bits -> [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Tensor ParameterStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  if (!value.is_leaf()) throw ContractError("parameter '" + name + "' must be a leaf");
  value.set_requires_grad(true);
  entries_.push_back({name, value});
  return value;
}

Tensor ParameterStore::add_normal(const std::string& name, Shape shape,
                                  double stddev, Rng& rng) {
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = stddev * rng.normal();
  return add(name, Tensor::from(std::move(shape), std::move(values)));
}

Tensor ParameterStore::add_constant(const std::string& name, Shape shape,
                                    double value) {
  return add(name, Tensor::full(std::move(shape), value));
}

const Tensor& ParameterStore::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw ContractError("unknown parameter '" + name + "'");
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const NamedTensor& e) { return e.name == name; });
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void ParameterStore::set_trainable(bool trainable) {
  for (auto& e : entries_) e.tensor.set_requires_grad(trainable);
}

Conv2d make_conv(ParameterStore& store, const std::string& name,
                 std::size_t in_channels, std::size_t out_channels,
                 std::size_t kernel, std::size_t stride, std::size_t pad,
                 Rng& rng, double gain) {
  const double fan_in = static_cast<double>(in_channels * kernel * kernel);
  Conv2d conv;
  conv.weight = store.add_normal(name + ".weight",
                                 {out_channels, in_channels, kernel, kernel},
                                 gain * std::sqrt(2.0 / fan_in), rng);
  conv.bias = store.add_constant(name + ".bias", {out_channels}, 0.0);
  conv.stride = stride;
  conv.pad = pad;
  return conv;
}

Linear make_linear(ParameterStore& store, const std::string& name,
                   std::size_t in_features, std::size_t out_features, Rng& rng,
                   double gain) {
  Linear fc;
  fc.weight = store.add_normal(name + ".weight", {out_features, in_features},
                               gain * std::sqrt(1.0 / static_cast<double>(in_features)),
                               rng);
  fc.bias = store.add_constant(name + ".bias", {out_features}, 0.0);
  return fc;
}

}  // namespace talkface
