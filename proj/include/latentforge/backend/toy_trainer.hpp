// Copyright 2026 The LatentForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Training utilities for the toy transformer: Adam, supervised pretraining
// on the synthetic task, and the joint alignment + answer objective with
// gradients through the latent rollout.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "latentforge/backend/toy_backend.hpp"
#include "latentforge/backend/toy_task.hpp"
#include "latentforge/backend/toy_transformer.hpp"

namespace latentforge::toy {

class Adam {
 public:
  struct Options {
    double learning_rate = 3e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;  // global gradient-norm clip, <= 0 disables
  };

  Adam(const ModelConfig& cfg, Options opts);

  // `frozen(name)` returning true skips that tensor.
  void step(Params& params, const Params& grads,
            const std::function<bool(const std::string&)>& frozen = {});

 private:
  Options opts_;
  Params m_, v_;
  std::size_t t_ = 0;
};

// Text continuation after the latents: [<latent_end>, answer..., <eos>].
// The first element is predicted at the last latent row.
std::vector<TokenId> continuation_targets(const std::vector<TokenId>& answer);

// Answer negative log-likelihood (summed over the continuation) for fixed
// latents. When `grads` is non-null the gradient scaled by `weight` is
// accumulated into it; a positive `query_weight` adds an auxiliary loss
// making the query rows predict the answer too (not part of the return).
double answer_nll(const ToyTransformer& model, const ToyInstance& inst,
                  const Matrix& latents, Params* grads = nullptr,
                  double weight = 1.0, bool train_patch_projection = true,
                  double query_weight = 0.0);

// Mean embedding of each latent's clue group in latent units (K x d).
Matrix clue_targets(const ToyTransformer& model, const ToyInstance& inst,
                    std::size_t k);

struct JointTerms {
  double alignment = 0.0;   // (1/K) sum_k ||h_k - clue_k||^2
  double answer_nll = 0.0;  // -sum log p(continuation)
};

// Runs the K-step rollout, scores both terms and accumulates
// weight * d(alignment + lambda * answer_nll) into `grads`, including the
// paths through fed-back latents. The patch projection receives no gradient.
JointTerms joint_objective_grad(const ToyTransformer& model,
                                const ToyInstance& inst, std::size_t k,
                                double lambda, Params& grads, double weight = 1.0);

struct PretrainConfig {
  std::uint64_t seed = 0;
  std::size_t steps = 1200;
  std::size_t batch = 16;
  double learning_rate = 3e-3;
  std::size_t k = 4;
  // Probability that a training sequence carries clue latents instead of the
  // model's own rollout.
  double clue_probability = 0.3;
  // Auxiliary answer prediction from the query rows.
  double query_answer_weight = 0.5;
  ToyTaskConfig task;
};

std::shared_ptr<const ToyTransformer> pretrain_toy_model(
    const PretrainConfig& cfg, const ModelConfig& model_cfg = {});

void save_params(const Params& params, const ModelConfig& cfg,
                 const std::filesystem::path& path);
Params load_params(const ModelConfig& cfg, const std::filesystem::path& path);

// LATENTFORGE_CACHE, else ~/.cache/latentforge, else ./.latentforge-cache.
std::filesystem::path default_cache_dir();

// Loads the checkpoint for (cfg, model_cfg) from `cache_dir` or trains and
// stores it. Training is deterministic, so the cache only saves time.
std::shared_ptr<const ToyTransformer> load_or_pretrain(
    const PretrainConfig& cfg, const ModelConfig& model_cfg = {},
    const std::filesystem::path& cache_dir = default_cache_dir());

// The default pretrained toy backend for a backend seed.
std::unique_ptr<ToyBackend> pretrained_toy_backend(std::uint64_t seed = 0);

// Fraction of instances whose greedy decode equals the gold answer, using
// either the model's own rollout latents or those produced by `latent_source`.
double toy_accuracy(const ToyTransformer& model,
                    const std::vector<ToyInstance>& instances, std::size_t k,
                    const ToyTransformer* latent_source = nullptr);

}  // namespace latentforge::toy
