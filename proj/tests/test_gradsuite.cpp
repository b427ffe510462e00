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

#include <set>

#include "doctest.h"
#include "talkface/gradsuite.hpp"

using namespace talkface;

TEST_CASE("gradient suite passes for every operator") {
  const SuiteReport r = run_gradient_suite();
  std::set<std::string> ops;
  for (const auto& e : r.entries) {
    CHECK_MESSAGE(e.passed, e.op << " " << e.worst);
    CHECK(e.seeds == kSuiteSeeds);
    ops.insert(e.op.substr(0, e.op.find('/')));
  }
  for (const char* name :
       {"adain", "residual_adain_block", "score_softmax", "affine_warp[feature]",
        "affine_warp[theta]", "affine_warp[tx]", "affine_warp[ty]", "affine_warp[scale]",
        "facial_attribute_loss", "perception_loss", "lsgan_losses", "l1_reconstruction",
        "contrastive_loss", "decode_face", "composite_and_blend"}) {
    CHECK_MESSAGE(ops.count(name) == 1, name);
  }
  CHECK(r.passed());
  CHECK(r.seconds < 60.0);
}

TEST_CASE("a tolerance below double rounding fails the suite") {
  const SuiteReport r = run_gradient_suite(1, 1e-30);
  CHECK_FALSE(r.passed());
}
