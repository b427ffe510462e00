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

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "talkface/checkpoint.hpp"
#include "talkface/error.hpp"
#include "talkface/model.hpp"
#include "talkface/ops.hpp"
#include "talkface/scene.hpp"
#include "talkface/train.hpp"

using namespace talkface;

namespace {

PipelineConfig tiny_config() {
  PipelineConfig c;
  c.dims.image_size = 32;
  c.dims.channels = 8;
  c.dims.feature_dim = 16;
  c.dims.embed_dim = 8;
  c.batch_size = 2;
  c.samples = 4;
  c.steps = 3;
  c.sync_max_steps = 5;
  return c;
}

double max_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST_CASE("untrained forward on a batch of two") {
  const auto cfg = tiny_config();
  const auto ds = generate_dataset(cfg, 2);
  const Model model(cfg);
  const ForwardResult r = forward(model, ds.samples, cfg);
  REQUIRE(r.samples.size() == 2);
  CHECK(r.visual_batch.shape() == Shape{2, 8});
  CHECK(r.audio_batch.shape() == Shape{2, 16});
  CHECK(r.scores.visual_to_audio.shape() == Shape{2, 2});
  for (const auto& f : r.samples) {
    CHECK(f.generated.shape() == Shape{3, 32, 32});
    CHECK(f.aligned.shape() == Shape{8, 8, 8});
    // Identity-initialized warp leaves the reference feature untouched.
    CHECK(max_diff(f.deformed, f.reference_feature) < 1e-6);
    // Zero-initialized blend net: the final frame is the composite.
    CHECK(max_diff(f.final_frame, f.composite) < 1e-12);
    // Composite = m I_o + (1 - m) source, checked pixel by pixel.
    double worst = 0.0;
    const auto& src = ds.samples[&f - r.samples.data()].source_frame;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 32; ++i)
        for (std::size_t j = 0; j < 32; ++j) {
          const double m = model.face_mask.at({0, i, j});
          const double want = m * f.generated.at({c, i, j}) + (1 - m) * src.at({c, i, j});
          worst = std::max(worst, std::abs(want - f.composite.at({c, i, j})));
        }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("no_fusion returns the decoder output") {
  auto cfg = tiny_config();
  cfg.no_fusion = true;
  const auto ds = generate_dataset(cfg, 2);
  const Model model(cfg);
  const ForwardResult r = forward(model, ds.samples, cfg);
  for (const auto& f : r.samples) CHECK(max_diff(f.final_frame, f.generated) == 0.0);
}

TEST_CASE("forward contracts") {
  auto cfg = tiny_config();
  const auto ds = generate_dataset(cfg, 2);
  const Model model(cfg);
  CHECK_THROWS_AS(forward(model, std::span(ds.samples).first(1), cfg), ContractError);
  auto ablated = cfg;
  ablated.no_alignment = true;
  CHECK_THROWS_AS(forward(model, ds.samples, ablated), ContractError);
  const Model plain(ablated);
  CHECK(plain.alignment.empty());
  CHECK_NOTHROW(forward(plain, ds.samples, ablated));
}

TEST_CASE("every parameter gets a finite nonzero gradient after one step") {
  auto cfg = tiny_config();
  cfg.optimizer = OptimizerKind::kAdam;
  cfg.learning_rate = 1e-3;
  const auto ds = generate_dataset(cfg, 2);
  Model model(cfg);
  const RandomConvExtractor extractor;
  model.sync_store.set_trainable(true);
  std::vector<Tensor> all;
  for (auto* s : model.stores())
    for (const auto& t : parameters_of(*s)) all.push_back(t);
  Optimizer opt(cfg.optimizer, cfg.learning_rate, all);

  auto step = [&] {
    const ForwardResult r = forward(model, ds.samples, cfg);
    const GeneratorLosses g = generator_losses(model, r, ds.samples, cfg, extractor);
    const Tensor total = g.objective + discriminator_loss(model, r, ds.samples);
    opt.zero_grad();
    backward(total);
  };
  step();
  opt.step();
  step();
  for (const auto* store : model.stores()) {
    for (const auto& e : store->entries()) {
      const auto g = e.tensor.grad();
      REQUIRE_MESSAGE(g.size() == e.tensor.size(), e.name);
      bool finite = true, nonzero = false;
      for (double v : g) {
        finite = finite && std::isfinite(v);
        nonzero = nonzero || v != 0.0;
      }
      CHECK_MESSAGE(finite, e.name);
      CHECK_MESSAGE(nonzero, e.name);
    }
  }
}

TEST_CASE("checkpoint round trip reproduces the forward pass") {
  auto cfg = tiny_config();
  cfg.optimizer = OptimizerKind::kAdam;
  cfg.learning_rate = 1e-3;
  const auto ds = generate_dataset(cfg, 4);
  Model trained(cfg);
  train(trained, ds.samples, cfg);
  const auto bytes = encode_checkpoint(std::as_const(trained).stores());

  auto other = cfg;
  other.seed = 99;  // different initial weights
  Model restored(other);
  decode_checkpoint(bytes, restored.stores());
  const auto batch = std::span(ds.samples).first(2);
  const ForwardResult a = forward(trained, batch, cfg), b = forward(restored, batch, cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(max_diff(a.samples[i].final_frame, b.samples[i].final_frame) < 1e-6);
  }
  CHECK(max_diff(a.scores.visual_to_audio, b.scores.visual_to_audio) < 1e-6);
}

TEST_CASE("training is deterministic per seed") {
  const auto cfg = tiny_config();
  const auto ds = generate_dataset(cfg, 4);
  Model m1(cfg), m2(cfg);
  const auto r1 = train(m1, ds.samples, cfg), r2 = train(m2, ds.samples, cfg);
  REQUIRE(r1.rows.size() == 3);
  REQUIRE(r2.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(format_loss_row(r1.rows[i]) == format_loss_row(r2.rows[i]));
  CHECK(encode_checkpoint(std::as_const(m1).stores()) ==
        encode_checkpoint(std::as_const(m2).stores()));
}

TEST_CASE("loss rows follow the weighted total") {
  auto cfg = tiny_config();
  cfg.weights.contrastive = 0.0;
  const auto ds = generate_dataset(cfg, 4);
  Model model(cfg);
  std::vector<LossRow> streamed;
  const auto res = train(model, ds.samples, cfg, [&](const LossRow& r) { streamed.push_back(r); });
  REQUIRE(streamed.size() == res.rows.size());
  for (const auto& r : res.rows) {
    CHECK(r.contrastive > 0.0);  // still logged
    const double want = 1 * r.attribute + 2 * r.perception + 3 * (r.generator + r.discriminator) +
                        4 * r.reconstruction;
    CHECK(r.total == doctest::Approx(want).epsilon(1e-12));
  }
  // With the default weights the contrastive column enters with weight 5.
  const auto cfg2 = tiny_config();
  Model m2(cfg2);
  const auto r2 = train(m2, ds.samples, cfg2).rows[0];
  CHECK(r2.total == doctest::Approx(r2.attribute + 2 * r2.perception +
                                    3 * (r2.generator + r2.discriminator) +
                                    4 * r2.reconstruction + 5 * r2.contrastive)
                        .epsilon(1e-12));
  CHECK(format_loss_row(r2).rfind("1,", 0) == 0);
  CHECK(std::string(kLossCsvHeader) == "step,L_v,L_p,L_D,L_G,L_r,L_con,total");
}

TEST_CASE("ablated alignment drops the contrastive term") {
  auto cfg = tiny_config();
  cfg.no_alignment = true;
  CHECK(effective_weights(cfg).contrastive == 0.0);
  const auto ds = generate_dataset(cfg, 4);
  Model model(cfg);
  const auto res = train(model, ds.samples, cfg);
  CHECK(res.sync.steps == 0);
  const auto& r = res.rows[0];
  CHECK(r.total == doctest::Approx(r.attribute + 2 * r.perception +
                                   3 * (r.generator + r.discriminator) + 4 * r.reconstruction)
                       .epsilon(1e-12));
}

TEST_CASE("sync phase stops at the threshold or the step cap") {
  auto cfg = tiny_config();
  cfg.sync_max_steps = 7;
  const auto ds = generate_dataset(cfg, 4);
  Model model(cfg);
  const auto res = train(model, ds.samples, cfg);
  const double stop = kSyncStopFraction * std::log(2.0);
  CHECK(((res.sync.steps == 7) || (res.sync.final_loss < stop)));
  CHECK(res.sync.steps <= 7);
  // Frozen after phase 1: generator training leaves the heads unchanged.
  Model again(cfg);
  auto no_phase2 = cfg;
  no_phase2.steps = 0;
  train(again, ds.samples, no_phase2);
  for (std::size_t k = 0; k < model.sync_store.entries().size(); ++k) {
    CHECK(max_diff(model.sync_store.entries()[k].tensor, again.sync_store.entries()[k].tensor) == 0.0);
  }
}

TEST_CASE("divergence guard needs fifty consecutive blow-ups") {
  DivergenceGuard guard;
  guard.observe(1, 1.0);
  for (std::size_t s = 2; s < 51; ++s) guard.observe(s, 11.0);
  guard.observe(51, 5.0);  // streak broken
  for (std::size_t s = 52; s < 101; ++s) guard.observe(s, 20.0);
  CHECK_THROWS_AS(guard.observe(101, 20.0), DivergenceError);
  DivergenceGuard edge;
  edge.observe(1, 2.0);
  for (std::size_t s = 2; s < 200; ++s) edge.observe(s, 20.0);  // exactly 10x is not above
}

TEST_CASE("batch schedule covers each epoch once") {
  const auto a = batch_schedule(10, 4, 6, 3), b = batch_schedule(10, 4, 6, 3);
  CHECK(a == b);
  REQUIRE(a.size() == 6);
  for (std::size_t epoch = 0; epoch < 3; ++epoch) {
    std::set<std::size_t> seen;
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i : a[epoch * 2 + k]) seen.insert(i);
    CHECK(seen.size() == 8);
  }
  CHECK(a[0] != a[2]);
  CHECK_THROWS_AS(batch_schedule(3, 4, 1, 0), ContractError);
}

TEST_CASE("optimizer updates") {
  Tensor w = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
  SUBCASE("sgd subtracts lr times gradient") {
    Optimizer opt(OptimizerKind::kSgd, 0.1, {w});
    backward(ops::sum(w * w));  // grad 2w
    opt.step();
    CHECK(w.data()[0] == doctest::Approx(0.8));
    CHECK(w.data()[1] == doctest::Approx(-1.6));
    CHECK(w.data()[2] == doctest::Approx(0.4));
  }
  SUBCASE("adam first step moves by lr against the gradient sign") {
    Optimizer opt(OptimizerKind::kAdam, 0.01, {w});
    backward(ops::sum(w * w));
    opt.step();
    CHECK(w.data()[0] == doctest::Approx(0.99).epsilon(1e-6));
    CHECK(w.data()[1] == doctest::Approx(-1.99).epsilon(1e-6));
    CHECK(w.data()[2] == doctest::Approx(0.49).epsilon(1e-6));
  }
  CHECK_THROWS_AS(Optimizer(OptimizerKind::kSgd, 0.0, {w}), ContractError);
}

TEST_CASE("training-set scores respect the blend residual bound") {
  auto cfg = tiny_config();
  cfg.optimizer = OptimizerKind::kAdam;
  cfg.learning_rate = 1e-2;
  const auto ds = generate_dataset(cfg, 4);
  Model model(cfg);
  train(model, ds.samples, cfg);
  const auto s = evaluate_training_set(model, ds.samples, cfg);
  CHECK(s.max_blend_residual <= kBlendResidualCap);
  CHECK(s.max_blend_residual > 0.0);
  CHECK(s.ssim > 0.0);
  CHECK(s.ssim <= 1.0);
  CHECK(std::isfinite(s.masked_l1));
}
