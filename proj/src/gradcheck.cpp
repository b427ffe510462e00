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

#include "talkface/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "talkface/error.hpp"

namespace talkface {

std::string GradCheckResult::describe() const {
  std::ostringstream out;
  if (!finite()) {
    out << "non-finite value at input " << *nonfinite_input << " coordinate "
        << *nonfinite_index;
    return out.str();
  }
  out << "max relative error " << max_rel_error << " (input " << worst_input
      << ", coordinate " << worst_index << ", " << coordinates_checked
      << " coordinates)";
  return out.str();
}

namespace {

void record(GradCheckResult& result, double analytic, double central,
            std::size_t input, std::size_t index) {
  const double err = std::abs(analytic - central) / std::max(1.0, std::abs(central));
  ++result.coordinates_checked;
  if (err > result.max_rel_error) {
    result.max_rel_error = err;
    result.worst_input = input;
    result.worst_index = index;
  }
}

std::vector<std::size_t> pick_coordinates(std::size_t n, std::size_t limit,
                                          std::mt19937_64& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (limit == 0 || limit >= n) return all;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(limit);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f,
                           std::vector<Tensor> inputs,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ContractError("grad_check: step must be positive");
  for (auto& x : inputs) {
    if (!x.is_leaf()) throw ContractError("grad_check: inputs must be leaves");
    x.set_requires_grad(true);
    x.zero_grad();
  }
  GradCheckResult result;
  const Tensor root = f();
  if (!std::isfinite(root.item())) {
    result.nonfinite_input = 0;
    result.nonfinite_index = 0;
    return result;
  }
  backward(root);
  std::vector<std::vector<double>> analytic;
  for (auto& x : inputs) {
    auto g = x.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(x.size(), 0.0);
    x.zero_grad();
  }

  std::mt19937_64 rng(options.seed);
  const double h = options.step;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_data();
    for (std::size_t i : pick_coordinates(values.size(), options.max_coords_per_input, rng)) {
      const double saved = values[i];
      values[i] = saved + h;
      const double plus = f().item();
      values[i] = saved - h;
      const double minus = f().item();
      values[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        result.nonfinite_input = k;
        result.nonfinite_index = i;
        return result;
      }
      record(result, analytic[k][i], (plus - minus) / (2.0 * h), k, i);
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f,
                           Tensor x, double step) {
  GradCheckOptions options;
  options.step = step;
  return grad_check([&f, &x] { return f(x); }, {x}, options);
}

GradCheckResult grad_check_analytic(
    const std::function<double(const std::vector<double>&)>& f,
    const std::function<std::vector<double>(const std::vector<double>&)>& grad,
    const std::vector<double>& x, double step) {
  if (!(step > 0.0)) throw ContractError("grad_check: step must be positive");
  GradCheckResult result;
  const auto analytic = grad(x);
  if (analytic.size() != x.size()) {
    throw ShapeError("grad_check: gradient length does not match input");
  }
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double plus = f(probe);
    probe[i] = x[i] - step;
    const double minus = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      result.nonfinite_input = 0;
      result.nonfinite_index = i;
      return result;
    }
    record(result, analytic[i], (plus - minus) / (2.0 * step), 0, i);
  }
  return result;
}

}  // namespace talkface
