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

#include "latentforge/reinforce.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "latentforge/linalg.hpp"
#include "latentforge/rng.hpp"
#include "latentforge/simd/kernels.hpp"

namespace latentforge {

void ReinforceConfig::validate() const {
  require(alpha > 0.0, ErrorCode::kInvalidArgument, "reinforce.alpha must be > 0");
  require(sigma0 > 0.0, ErrorCode::kInvalidArgument, "reinforce.sigma0 must be > 0");
  require(gamma > 0.0 && gamma <= 1.0, ErrorCode::kInvalidArgument,
          "reinforce.gamma must lie in (0, 1]");
  require(delta >= 1, ErrorCode::kInvalidArgument, "reinforce.delta must be >= 1");
}

double topk_entropy(std::span<const double> probs, std::size_t delta) {
  require(delta >= 1, ErrorCode::kInvalidArgument, "delta must be >= 1");
  require(!probs.empty(), ErrorCode::kInvalidArgument, "empty distribution");
  double total = 0.0;
  for (double p : probs) {
    require(p >= 0.0 && std::isfinite(p), ErrorCode::kInvalidArgument,
            "probabilities must be finite and non-negative");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-6, ErrorCode::kInvalidArgument,
          "probabilities must sum to 1");
  std::vector<double> sorted(probs.begin(), probs.end());
  const std::size_t take = std::min(delta, sorted.size());
  std::partial_sort(sorted.begin(), sorted.begin() + take, sorted.end(),
                    std::greater<double>());
  double h = 0.0;
  for (std::size_t j = 0; j < take; ++j) {
    if (sorted[j] > 0.0) h -= sorted[j] * std::log(sorted[j]);
  }
  return h;
}

std::vector<double> entropy_profile(const Matrix& latent_logits, std::size_t delta) {
  require(latent_logits.rows() >= 1, ErrorCode::kInvalidArgument, "K must be >= 1");
  std::vector<double> out;
  out.reserve(latent_logits.rows());
  std::vector<double> probs(latent_logits.cols());
  for (std::size_t k = 0; k < latent_logits.rows(); ++k) {
    const auto row = latent_logits.row(k);
    const double max_v = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      probs[j] = std::exp(row[j] - max_v);
      z += probs[j];
    }
    for (double& p : probs) p /= z;
    out.push_back(topk_entropy(probs, delta));
  }
  return out;
}

double progression_reward_from_entropies(std::span<const double> e) {
  require(!e.empty(), ErrorCode::kInvalidArgument, "K must be >= 1");
  if (e.size() == 1) return 0.0;
  double r = 0.0;
  for (std::size_t k = 0; k + 1 < e.size(); ++k) r += std::max(0.0, e[k] - e[k + 1]);
  return r / static_cast<double>(e.size() - 1);
}

double progression_reward(const Matrix& latent_logits, std::size_t delta) {
  return progression_reward_from_entropies(entropy_profile(latent_logits, delta));
}

double sigma_at(std::size_t step, double sigma0, double gamma) {
  return sigma0 * std::pow(gamma, static_cast<double>(step));
}

double sigma_at(std::size_t step, const ReinforceConfig& config) {
  return sigma_at(step, config.sigma0, config.gamma);
}

LatentState nes_step(const LatentState& h, const Matrix& eps, double sigma, double alpha,
                     double reward) {
  require(eps.rows() == h.vectors.rows() && eps.cols() == h.vectors.cols(),
          ErrorCode::kDimensionMismatch, "noise shape differs from the latent state");
  require(sigma > 0.0, ErrorCode::kInvalidArgument, "sigma must be > 0");
  LatentState next = h;
  if (reward == 0.0) return next;
  simd::axpy(alpha / (sigma * sigma) * reward, eps.flat(), next.vectors.flat());
  return next;
}

ReinforceResult reinforce_run(Backend& backend, const BackendContext& ctx,
                              const LatentState& h_sft, const ReinforceConfig& config,
                              std::uint64_t rng_seed) {
  config.validate();
  ReinforceResult result{h_sft, {}};
  RewardTrace& trace = result.trace;
  if (config.n_rl == 0) return result;

  double sigma0 = config.sigma0;
  if (config.sigma0_relative) {
    const double scale = rms(h_sft.vectors);
    if (scale > 0.0) sigma0 *= scale;
  }
  trace.sigma0_effective = sigma0;

  const std::size_t delta = config.delta;
  double best_reward = progression_reward(backend.evaluate(ctx, h_sft).latent_logits, delta);
  trace.initial_reward = best_reward;

  Rng rng(rng_seed);
  LatentState h = h_sft;
  Matrix eps(h.vectors.rows(), h.vectors.cols());
  for (std::size_t i = 0; i < config.n_rl; ++i) {
    const double sigma = sigma_at(i, sigma0, config.gamma);
    for (double& v : eps.flat()) v = sigma * rng.normal();
    LatentState candidate = h;
    simd::axpy(1.0, eps.flat(), candidate.vectors.flat());
    const EvalOutput eval = backend.evaluate(ctx, candidate);
    std::vector<double> profile = entropy_profile(eval.latent_logits, delta);
    const double reward = progression_reward_from_entropies(profile);
    LatentState next = nes_step(h, eps, sigma, config.alpha, reward);
    if (reward > best_reward) {
      best_reward = reward;
      result.best = next;
    }
    trace.reward_per_step.push_back(reward);
    trace.best_reward_per_step.push_back(best_reward);
    trace.entropy_profiles.push_back(std::move(profile));
    h = std::move(next);
  }
  return result;
}

}  // namespace latentforge
