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
#include <random>
#include <string>
#include <vector>

#include "talkface/ops.hpp"
#include "talkface/tensor.hpp"

namespace talkface {

// Seeded generator with a portable normal sampler (Box-Muller over
// mt19937_64), so parameter initialization is reproducible bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t next() { return engine_(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Ordered collection of trainable tensors; order is insertion order and is
// the order used by checkpoints and optimizers.
class ParameterStore {
 public:
  Tensor add(const std::string& name, Tensor value);
  Tensor add_normal(const std::string& name, Shape shape, double stddev, Rng& rng);
  Tensor add_constant(const std::string& name, Shape shape, double value);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::size_t parameter_count() const;

  void zero_grad();
  void set_trainable(bool trainable);

 private:
  std::vector<NamedTensor> entries_;
};

struct Conv2d {
  Tensor weight;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t pad = 0;

  Tensor operator()(const Tensor& x) const {
    return ops::conv2d(x, weight, bias, stride, pad);
  }
  std::size_t out_channels() const { return weight.dim(0); }
};

struct Linear {
  Tensor weight;
  Tensor bias;

  Tensor operator()(const Tensor& x) const { return ops::linear(x, weight, bias); }
  std::size_t out_features() const { return weight.dim(0); }
};

// He-normal weights scaled by `gain`, zero bias.
Conv2d make_conv(ParameterStore& store, const std::string& name,
                 std::size_t in_channels, std::size_t out_channels,
                 std::size_t kernel, std::size_t stride, std::size_t pad,
                 Rng& rng, double gain = 1.0);
Linear make_linear(ParameterStore& store, const std::string& name,
                   std::size_t in_features, std::size_t out_features, Rng& rng,
                   double gain = 1.0);

}  // namespace talkface
