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

// Stage II: confidence-progression reward and a single-sample NES update.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "latentforge/backend/backend.hpp"

namespace latentforge {

struct ReinforceConfig {
  double alpha = 0.02;
  // When sigma0_relative is set the effective initial scale is
  // sigma0 * RMS(H_sft); otherwise sigma0 is used as is.
  double sigma0 = 0.1;
  bool sigma0_relative = true;
  double gamma = 0.9;
  std::size_t delta = 10;
  std::size_t n_rl = 15;

  void validate() const;
  friend bool operator==(const ReinforceConfig&, const ReinforceConfig&) = default;
};

struct RewardTrace {
  double initial_reward = 0.0;  // R(H_sft)
  double sigma0_effective = 0.0;
  std::vector<double> reward_per_step;
  std::vector<double> best_reward_per_step;
  std::vector<std::vector<double>> entropy_profiles;  // n_rl x K

  friend bool operator==(const RewardTrace&, const RewardTrace&) = default;
};

struct ReinforceResult {
  LatentState best;
  RewardTrace trace;
};

// Entropy of the delta largest probabilities, not renormalized.
double topk_entropy(std::span<const double> probs, std::size_t delta);

// Row softmax of logits, then topk_entropy per row.
std::vector<double> entropy_profile(const Matrix& latent_logits, std::size_t delta);

// Mean hinged decrease of consecutive entropies; 0 for a single entry.
double progression_reward_from_entropies(std::span<const double> entropies);

double progression_reward(const Matrix& latent_logits, std::size_t delta);

double sigma_at(std::size_t step, const ReinforceConfig& config);
double sigma_at(std::size_t step, double sigma0, double gamma);

// H + (alpha / sigma^2) * reward * eps
LatentState nes_step(const LatentState& h, const Matrix& eps, double sigma, double alpha,
                     double reward);

ReinforceResult reinforce_run(Backend& backend, const BackendContext& ctx,
                              const LatentState& h_sft, const ReinforceConfig& config,
                              std::uint64_t rng_seed);

}  // namespace latentforge
