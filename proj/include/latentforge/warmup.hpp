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

// Stage I: query-guided contrastive latent warm-up with the model frozen.
//
// For latent h_k with positives P_k and negatives N_k,
//   L_k = -log( beta * sum_{v in P_k} e^{sim(h_k,v)/tau}
//                    / sum_{v in P_k u N_k} e^{sim(h_k,v)/tau} ),
//   beta = (pos_num + neg_num) / pos_num,
// and the objective is the mean of L_k over k. beta makes the loss exactly
// zero when all similarities in a chunk pair are equal, so it can go
// negative once positives dominate.

#include <cstddef>
#include <span>
#include <vector>

#include "latentforge/backend/backend.hpp"
#include "latentforge/relevance.hpp"

namespace latentforge {

struct WarmupConfig {
  double tau = 0.1;
  double learning_rate = 0.1;
  std::size_t n_sft = 5;
  std::size_t pos_num = 2;
  std::size_t neg_num = 4;

  void validate() const;
  friend bool operator==(const WarmupConfig&, const WarmupConfig&) = default;
};

struct WarmupTrace {
  std::vector<double> loss_per_step;       // n_sft + 1, starting with H0
  std::vector<double> grad_norm_per_step;  // n_sft

  friend bool operator==(const WarmupTrace&, const WarmupTrace&) = default;
};

struct WarmupResult {
  LatentState latents;
  WarmupTrace trace;
};

double cosine_sim(std::span<const double> h, std::span<const double> v);

double contrastive_loss(const LatentState& latents, const Matrix& visual_embeddings,
                        const ChunkAssignment& assignment, double tau);

// Exact gradient of contrastive_loss with respect to every latent row.
Matrix contrastive_grad(const LatentState& latents, const Matrix& visual_embeddings,
                        const ChunkAssignment& assignment, double tau);

// n_sft plain gradient-descent steps. Relevance and chunks are recomputed
// from a fresh evaluation before every step.
WarmupResult warmup_run(Backend& backend, const BackendContext& ctx,
                        const LatentState& initial, const WarmupConfig& config);

}  // namespace latentforge
