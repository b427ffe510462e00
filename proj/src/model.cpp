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

#include "talkface/model.hpp"

#include <string>

#include "talkface/error.hpp"
#include "talkface/ops.hpp"
#include "talkface/scene.hpp"

namespace talkface {

Tensor Critic::operator()(const Tensor& x) const {
  const Tensor h = ops::leaky_relu(second(ops::leaky_relu(first(x))));
  const Tensor s = out(h);
  return ops::reshape(s, {s.size()});
}

Critic make_critic(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                   Rng& rng) {
  Critic c;
  c.first = make_conv(store, prefix + ".conv1", in_channels, 16, 3, 2, 1, rng);
  c.second = make_conv(store, prefix + ".conv2", 16, 32, 3, 2, 1, rng);
  c.out = make_conv(store, prefix + ".conv3", 32, 1, 3, 2, 1, rng, 0.5);
  return c;
}

Model::Model(const PipelineConfig& config) : dims(config.dims) {
  config.validate();
  plain_alignment_only = config.no_alignment;
  Rng rng(config.seed);
  const std::size_t c = dims.channels, d = dims.feature_dim, h = dims.image_size;
  encoders = make_encoders(generator_store, dims, rng);
  if (plain_alignment_only) {
    plain_alignment = make_conv(generator_store, "align.plain", c, c, 3, 1, 1, rng);
  } else {
    for (std::size_t k = 0; k < config.alignment_blocks; ++k) {
      alignment.push_back(make_residual_adain_block(
          generator_store, "align.block" + std::to_string(k), d, c, rng));
    }
  }
  attribute_head = make_linear(generator_store, "attribute.head", c, d, rng);
  coeff_heads = make_coeff_heads(generator_store, c + d, c);
  decoder = make_face_decoder(generator_store, c, rng);
  blend = make_blend_net(generator_store, 16, rng);
  sync = make_projection_heads(sync_store, c, d, dims.embed_dim, rng);
  frame_critic = make_critic(critic_store, "critic.frame", 3, rng);
  clip_critic = make_critic(critic_store, "critic.clip", 15, rng);
  face_mask = gaussian_face_mask(h, h, lower_face_box(h), config.mask_sigma);
  masks = build_mask_pyramid(h, h);
}

std::vector<const ParameterStore*> Model::stores() const {
  return {&generator_store, &sync_store, &critic_store};
}

std::vector<ParameterStore*> Model::stores() {
  return {&generator_store, &sync_store, &critic_store};
}

ForwardResult forward(const Model& model, std::span<const SceneSample> batch,
                      const PipelineConfig& config) {
  if (batch.size() < 2) {
    throw ContractError("forward: the contrastive heads need a batch of at least 2, got " +
                        std::to_string(batch.size()));
  }
  if (config.no_alignment != model.plain_alignment_only) {
    throw ContractError("forward: no_alignment differs from the flag the model was built with");
  }
  ForwardResult out;
  std::vector<Tensor> visual_rows, audio_rows;
  for (const SceneSample& s : batch) {
    SampleForward f;
    f.audio = encode_audio(s.mel, model.encoders.audio);
    f.source_feature = encode_source(s.masked_source, model.encoders.source);
    f.reference_feature = encode_reference(s.references, model.encoders.reference);
    f.landmark = encode_landmark(s.landmark_map, model.encoders.landmark).pooled;
    f.fused = fuse_source_reference(f.source_feature, f.reference_feature, model.encoders.fusion);
    if (model.plain_alignment_only) {
      f.aligned = ops::leaky_relu(model.plain_alignment(f.fused));
    } else {
      f.aligned = f.fused;
      for (const auto& block : model.alignment) {
        f.aligned = residual_adain_block(f.aligned, f.landmark, block);
      }
    }
    const Tensor pooled = ops::global_avg_pool(f.aligned);
    f.attribute = model.attribute_head(ops::global_avg_pool(f.fused));
    f.coeffs = predict_affine_coeffs(ops::concat({pooled, f.audio}, 0), model.coeff_heads);
    f.deformed = affine_warp(f.reference_feature, f.coeffs, config.padding);
    f.generated = decode_face(f.aligned, f.deformed, model.decoder);
    if (config.no_fusion) {
      f.composite = f.generated;
      f.final_frame = f.generated;
    } else {
      const BlendOutput b =
          composite_and_blend({f.generated, s.source_frame, model.face_mask}, model.blend);
      f.composite = b.composite;
      f.final_frame = b.final_frame;
    }
    visual_rows.push_back(pooled);
    audio_rows.push_back(f.audio);
    out.samples.push_back(std::move(f));
  }
  out.visual_batch = ops::stack_rows(visual_rows);
  out.audio_batch = ops::stack_rows(audio_rows);
  out.scores = score_matrices(out.visual_batch, out.audio_batch, model.sync, config.temperature);
  out.similarity = similarity_distributions(out.scores);
  return out;
}

LossWeights effective_weights(const PipelineConfig& config) {
  LossWeights w = config.weights;
  if (config.no_alignment) w.contrastive = 0.0;
  return w;
}

Tensor clip_stack(const SceneSample& sample, const Tensor& centre) {
  const Tensor& nb = sample.neighbor_frames;
  return ops::concat({ops::slice(nb, 0, 0, 6), centre, ops::slice(nb, 0, 6, 12)}, 0);
}

GeneratorLosses generator_losses(const Model& model, const ForwardResult& result,
                                 std::span<const SceneSample> batch, const PipelineConfig& config,
                                 const FeatureExtractor& extractor) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Tensor attr, perc, recon;
  std::vector<Tensor> frame_scores, clip_scores;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const SampleForward& f = result.samples[i];
    const Tensor& truth = batch[i].truth_frame;
    const Tensor lv = facial_attribute_loss(f.attribute, f.landmark);
    const Tensor lp = perception_loss(f.final_frame, truth, extractor);
    const Tensor lr = config.no_supervision ? l1_reconstruction_unmasked(f.final_frame, truth)
                                            : l1_reconstruction(f.final_frame, truth, model.masks);
    attr = i == 0 ? lv : attr + lv;
    perc = i == 0 ? lp : perc + lp;
    recon = i == 0 ? lr : recon + lr;
    frame_scores.push_back(model.frame_critic(f.final_frame));
    clip_scores.push_back(model.clip_critic(clip_stack(batch[i], f.final_frame)));
  }
  const Tensor fake = ops::concat(std::span<const Tensor>(frame_scores), 0);
  const Tensor fake_clip = ops::concat(std::span<const Tensor>(clip_scores), 0);
  // The generator term only reads fake scores; real scores are placeholders.
  const Tensor gen = lsgan_losses(fake.detach(), fake).generator +
                     lsgan_losses(fake_clip.detach(), fake_clip).generator;

  GeneratorLosses out;
  out.terms.attribute = attr * inv_b;
  out.terms.perception = perc * inv_b;
  out.terms.reconstruction = recon * inv_b;
  out.terms.adversarial = gen * 0.5;
  out.terms.contrastive = contrastive_loss(result.similarity);
  out.objective = total_loss(out.terms, effective_weights(config));
  return out;
}

Tensor discriminator_loss(const Model& model, const ForwardResult& result,
                          std::span<const SceneSample> batch) {
  std::vector<Tensor> real_f, fake_f, real_c, fake_c;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor fake = result.samples[i].final_frame.detach();
    real_f.push_back(model.frame_critic(batch[i].truth_frame));
    fake_f.push_back(model.frame_critic(fake));
    real_c.push_back(model.clip_critic(clip_stack(batch[i], batch[i].truth_frame)));
    fake_c.push_back(model.clip_critic(clip_stack(batch[i], fake)));
  }
  auto cat = [](const std::vector<Tensor>& v) { return ops::concat(std::span<const Tensor>(v), 0); };
  const Tensor frame = lsgan_losses(cat(real_f), cat(fake_f)).discriminator;
  const Tensor clip = lsgan_losses(cat(real_c), cat(fake_c)).discriminator;
  return (frame + clip) * 0.5;
}

}  // namespace talkface
