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

// Toy-scale silencing diagnostics: the joint alignment + answer objective,
// a training run that tracks how jointly trained latents get bypassed, and
// the accuracy-per-token efficiency ratio.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "latentforge/backend/toy_task.hpp"
#include "latentforge/backend/toy_transformer.hpp"
#include "latentforge/backend/types.hpp"
#include "latentforge/tensor.hpp"

namespace latentforge::diagnostics {

// (1/K) sum_k ||h_k - clue_k||^2 + lambda * answer_nll. The NLL is passed
// as a positive quantity.
double joint_loss(const Matrix& latents, const Matrix& clues, double answer_nll,
                  double lambda);

struct AttentionShare {
  double latent = 0.0;
  double visual = 0.0;
};

// Range-checked passthrough of the decode attention shares.
AttentionShare attention_share(const DecodeOutput& decoded);

// (mean_gain / mean_output_tokens) * 10. Throws on a non-positive count.
double efficiency_ratio(double mean_gain, double mean_output_tokens);

// Spearman rank correlation with average ranks for ties; 0 when either
// series is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct JointTrainConfig {
  double lambda = 1.0;
  std::size_t steps = 240;
  double learning_rate = 1e-3;
  std::size_t checkpoint_every = 30;
  std::uint64_t seed = 0;
  std::size_t batch = 8;
  std::size_t k = 4;
  // Held-out instances scored at every checkpoint.
  std::size_t probe_instances = 64;
  toy::ToyTaskConfig task;

  void validate() const;
};

struct SilencingCheckpoint {
  std::size_t step = 0;
  double alignment_loss = 0.0;
  double answer_nll = 0.0;
  double latent_end_logit = 0.0;  // at the first latent position
  double attention_share_latent = 0.0;
  double attention_share_visual = 0.0;
  double donated_latents_accuracy = 0.0;
  double joint_model_accuracy = 0.0;
};

struct SilencingReport {
  JointTrainConfig config;
  // Checkpoints at step 0, every checkpoint_every steps and the final step.
  std::vector<SilencingCheckpoint> checkpoints;
  // Set when training produced a non-finite loss; checkpoints stop there.
  std::optional<std::string> divergence;
};

// Joint-trains a copy of `initial` (patch projection frozen) on the toy
// task. The donated-latents probe decodes with the frozen `initial` model
// fed the checkpoint's rollout latents.
SilencingReport silencing_demo(const JointTrainConfig& config,
                               const toy::ToyTransformer& initial);

// Same, starting from the default pretrained toy model.
SilencingReport silencing_demo(const JointTrainConfig& config);

nlohmann::json to_json(const SilencingReport& report, const std::string& arm);

// One JSON object per checkpoint and a CSV with the same columns.
void write_silencing_outputs(const std::vector<std::pair<std::string, SilencingReport>>& arms,
                             const std::filesystem::path& out_dir);

}  // namespace latentforge::diagnostics
