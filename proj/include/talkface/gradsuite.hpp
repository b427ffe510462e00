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
#include <string>
#include <vector>

namespace talkface {

inline constexpr double kSuiteTolerance = 1e-4;
inline constexpr std::size_t kSuiteSeeds = 5;

struct SuiteEntry {
  std::string op;
  double max_rel_error = 0.0;  // worst over seeds
  std::size_t seeds = 0;
  bool passed = false;
  std::string worst;  // description of the worst seed
};

struct SuiteReport {
  std::vector<SuiteEntry> entries;
  double seconds = 0.0;
  bool passed() const;
};

// Central finite-difference checks of every differentiable pipeline operator
// on small random fixtures, `seeds` fixtures per operator.
SuiteReport run_gradient_suite(std::size_t seeds = kSuiteSeeds,
                               double tolerance = kSuiteTolerance);

}  // namespace talkface
