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

// Backend test double. Each evaluate() returns logits produced by a script
// indexed by call number and records the latents it was called with.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "latentforge/backend/backend.hpp"

namespace latentforge::testing {

class ScriptedBackend : public Backend {
 public:
  using Script = std::function<Matrix(std::size_t call, const LatentState&)>;

  ScriptedBackend(std::size_t n_visual, std::size_t dim, std::size_t vocab, Script script)
      : n_visual_(n_visual), dim_(dim), vocab_(vocab), script_(std::move(script)) {}

  BackendInfo info() const override { return {dim_, vocab_, 3, 0}; }

  BackendContext encode(const VisualSpec& visual, const QueryTokens& query) override {
    BackendContext ctx;
    ctx.instance_id = "scripted";
    ctx.n_visual = visual.patches.rows();
    for (std::size_t i = 0; i < ctx.n_visual; ++i) ctx.visual_index_set.push_back(i);
    for (std::size_t i = 0; i < query.ids.size(); ++i) {
      ctx.query_index_set.push_back(ctx.n_visual + i);
    }
    ctx.seq_len = ctx.n_visual + query.ids.size();
    ctx.latent_dim = dim_;
    return ctx;
  }

  BackendContext context() const {
    VisualSpec v;
    v.patches = Matrix(n_visual_, 1);
    v.grid_rows = 1;
    v.grid_cols = n_visual_;
    return const_cast<ScriptedBackend*>(this)->encode(v, QueryTokens{{4, 5}});
  }

  LatentState initial_latents(const BackendContext&, std::size_t k) override {
    LatentState h{Matrix(k, dim_)};
    for (std::size_t i = 0; i < h.vectors.size(); ++i) {
      h.vectors.flat()[i] = std::sin(1.0 + static_cast<double>(i));
    }
    return h;
  }

  EvalOutput evaluate(const BackendContext&, const LatentState& latents) override {
    seen.push_back(latents);
    EvalOutput out;
    out.latent_logits = script_(seen.size() - 1, latents);
    out.qv_attention = Matrix(2, n_visual_);
    out.qv_attention.fill(1.0 / static_cast<double>(n_visual_ + 2));
    out.visual_embeddings = Matrix(n_visual_, dim_);
    for (std::size_t i = 0; i < out.visual_embeddings.size(); ++i) {
      out.visual_embeddings.flat()[i] = std::cos(0.7 * static_cast<double>(i));
    }
    out.latent_end_logit_per_position.assign(latents.k(), 0.0);
    return out;
  }

  DecodeOutput decode_answer(const BackendContext&, const LatentState&,
                             std::size_t) override {
    return DecodeOutput{{16}, 0.5, 0.5};
  }

  void close(const BackendContext&) override {}

  std::vector<LatentState> seen;

 private:
  std::size_t n_visual_, dim_, vocab_;
  Script script_;
};

// A logit row whose softmax is the two-point distribution (p, 1 - p, 0...)
// with entropy `target` (0 <= target <= ln 2).
inline std::vector<double> logits_with_entropy(double target, std::size_t vocab) {
  std::vector<double> row(vocab, -1e4);
  if (target <= 0.0) {
    row[0] = 0.0;
    return row;
  }
  double lo = 0.5, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double p = 0.5 * (lo + hi);
    const double h = -p * std::log(p) - (1 - p) * std::log(1 - p);
    (h > target ? lo : hi) = p;
  }
  const double p = 0.5 * (lo + hi);
  row[0] = std::log(p);
  row[1] = std::log(1 - p);
  return row;
}

// K = 2 logits whose progression reward equals `reward` for any delta >= 2.
inline Matrix logits_with_reward(double reward, std::size_t vocab) {
  Matrix m(2, vocab);
  const auto first = logits_with_entropy(reward, vocab);
  for (std::size_t c = 0; c < vocab; ++c) {
    m(0, c) = first[c];
    m(1, c) = c == 0 ? 0.0 : -1e4;
  }
  return m;
}

}  // namespace latentforge::testing
