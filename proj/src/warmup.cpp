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

#include "latentforge/warmup.hpp"

#include <algorithm>
#include <cmath>

#include "latentforge/linalg.hpp"
#include "latentforge/simd/kernels.hpp"

namespace latentforge {
namespace {

struct Candidate {
  std::size_t token;
  bool positive;
};

std::vector<Candidate> chunk_members(const ChunkAssignment& a, std::size_t k) {
  std::vector<Candidate> out;
  out.reserve(a.pos_num + a.neg_num);
  for (std::size_t t : a.positives[k]) out.push_back({t, true});
  for (std::size_t t : a.negatives[k]) out.push_back({t, false});
  return out;
}

void check_inputs(const LatentState& latents, const Matrix& visual,
                  const ChunkAssignment& a, double tau) {
  require(tau > 0.0, ErrorCode::kInvalidArgument, "tau must be positive");
  require(a.k() == latents.k() && a.negatives.size() == latents.k(),
          ErrorCode::kDimensionMismatch, "assignment K differs from the latent count");
  require(latents.dim() == visual.cols(), ErrorCode::kDimensionMismatch,
          "latent and visual embedding widths differ");
  for (std::size_t k = 0; k < a.k(); ++k) {
    require(a.positives[k].size() == a.pos_num && a.negatives[k].size() == a.neg_num,
            ErrorCode::kInvalidArgument, "chunk cardinality differs from pos/neg_num");
    for (const auto& c : chunk_members(a, k)) {
      require(c.token < visual.rows(), ErrorCode::kInvalidArgument,
              "chunk index beyond the visual token count");
    }
  }
}

// log-sum-exp of x over the selected entries.
double log_sum_exp(const std::vector<double>& x, const std::vector<Candidate>& members,
                   bool positives_only) {
  double max_v = -INFINITY;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!positives_only || members[i].positive) max_v = std::max(max_v, x[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!positives_only || members[i].positive) total += std::exp(x[i] - max_v);
  }
  return max_v + std::log(total);
}

double beta(const ChunkAssignment& a) {
  return static_cast<double>(a.pos_num + a.neg_num) / static_cast<double>(a.pos_num);
}

}  // namespace

void WarmupConfig::validate() const {
  require(tau > 0.0, ErrorCode::kInvalidArgument, "warmup.tau must be > 0");
  require(learning_rate > 0.0, ErrorCode::kInvalidArgument,
          "warmup.learning_rate must be > 0");
  require(pos_num >= 1, ErrorCode::kInvalidArgument, "warmup.pos_num must be >= 1");
}

double cosine_sim(std::span<const double> h, std::span<const double> v) {
  require(h.size() == v.size(), ErrorCode::kDimensionMismatch, "cosine_sim widths");
  const double nh = l2_norm(h);
  const double nv = l2_norm(v);
  require(nh > 0.0 && nv > 0.0, ErrorCode::kInvalidArgument,
          "cosine similarity of a zero-norm vector");
  return simd::dot(h, v) / (nh * nv);
}

double contrastive_loss(const LatentState& latents, const Matrix& visual,
                        const ChunkAssignment& a, double tau) {
  check_inputs(latents, visual, a, tau);
  const double log_beta = std::log(beta(a));
  double total = 0.0;
  std::vector<double> logits;
  for (std::size_t k = 0; k < latents.k(); ++k) {
    const auto members = chunk_members(a, k);
    logits.clear();
    for (const auto& c : members) {
      logits.push_back(cosine_sim(latents.vectors.row(k), visual.row(c.token)) / tau);
    }
    total += -(log_beta + log_sum_exp(logits, members, true) -
               log_sum_exp(logits, members, false));
  }
  return total / static_cast<double>(latents.k());
}

Matrix contrastive_grad(const LatentState& latents, const Matrix& visual,
                        const ChunkAssignment& a, double tau) {
  check_inputs(latents, visual, a, tau);
  const std::size_t d = latents.dim();
  Matrix grad(latents.k(), d);
  std::vector<double> logits, sims;
  const double inv_k = 1.0 / static_cast<double>(latents.k());
  for (std::size_t k = 0; k < latents.k(); ++k) {
    const auto h = latents.vectors.row(k);
    const double nh = l2_norm(h);
    require(nh > 0.0, ErrorCode::kInvalidArgument, "zero-norm latent");
    const auto members = chunk_members(a, k);
    logits.clear();
    sims.clear();
    for (const auto& c : members) {
      sims.push_back(cosine_sim(h, visual.row(c.token)));
      logits.push_back(sims.back() / tau);
    }
    const double lse_pos = log_sum_exp(logits, members, true);
    const double lse_all = log_sum_exp(logits, members, false);
    auto g = grad.row(k);
    for (std::size_t i = 0; i < members.size(); ++i) {
      // dL_k/dlogit_i = softmax_all_i - [i in P] softmax_pos_i
      double coeff = std::exp(logits[i] - lse_all);
      if (members[i].positive) coeff -= std::exp(logits[i] - lse_pos);
      coeff *= inv_k / tau;
      if (coeff == 0.0) continue;
      const auto v = visual.row(members[i].token);
      const double nv = l2_norm(v);
      // d sim / dh = v / (|h||v|) - sim * h / |h|^2
      simd::axpy(coeff / (nh * nv), v, g);
      simd::axpy(-coeff * sims[i] / (nh * nh), h, g);
    }
  }
  return grad;
}

WarmupResult warmup_run(Backend& backend, const BackendContext& ctx,
                        const LatentState& initial, const WarmupConfig& config) {
  config.validate();
  WarmupResult result{initial, {}};
  LatentState& h = result.latents;
  for (std::size_t step = 0;; ++step) {
    const EvalOutput eval = backend.evaluate(ctx, h);
    const RelevanceRanking ranking = rank_visual_tokens(eval.qv_attention);
    const ChunkAssignment chunks =
        assign_chunks(ranking.permutation, h.k(), config.pos_num, config.neg_num);
    result.trace.loss_per_step.push_back(
        contrastive_loss(h, eval.visual_embeddings, chunks, config.tau));
    if (step == config.n_sft) break;
    const Matrix grad = contrastive_grad(h, eval.visual_embeddings, chunks, config.tau);
    result.trace.grad_norm_per_step.push_back(l2_norm(grad.flat()));
    simd::axpy(-config.learning_rate, grad.flat(), h.vectors.flat());
  }
  return result;
}

}  // namespace latentforge
