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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "talkface/tensor.hpp"

namespace talkface {

struct GradCheckResult {
  // max_i |analytic_i - central_i| / max(1, |central_i|) over checked coordinates.
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
  // Set when f produced a non-finite value; names the perturbed coordinate.
  std::optional<std::size_t> nonfinite_input;
  std::optional<std::size_t> nonfinite_index;

  bool finite() const { return !nonfinite_index.has_value(); }
  bool passed(double tolerance) const {
    return finite() && max_rel_error < tolerance;
  }
  std::string describe() const;
};

struct GradCheckOptions {
  double step = 1e-5;
  // Upper bound on coordinates probed per input; 0 probes every coordinate.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 0;
};

// Compares reverse-mode gradients of a scalar function against central
// differences. `f` must rebuild its graph from the current values of `inputs`
// each call; inputs must be leaves and are restored on return.
GradCheckResult grad_check(const std::function<Tensor()>& f,
                           std::vector<Tensor> inputs,
                           const GradCheckOptions& options = {});

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f,
                           Tensor x, double step = 1e-5);

// Analytic-gradient variant used when the caller supplies its own gradient
// (e.g. to validate a hand-derived formula).
GradCheckResult grad_check_analytic(
    const std::function<double(const std::vector<double>&)>& f,
    const std::function<std::vector<double>(const std::vector<double>&)>& grad,
    const std::vector<double>& x, double step = 1e-5);

}  // namespace talkface
