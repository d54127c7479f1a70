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

#include "latentforge/backend/toy_backend.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

namespace latentforge::toy {
namespace {

Sequence make_sequence(const Matrix& patches, const std::vector<TokenId>& query,
                       Matrix latents) {
  Sequence seq;
  seq.patches = &patches;
  seq.query = &query;
  seq.latents = std::move(latents);
  return seq;
}

std::size_t argmax(std::span<const double> row) {
  return static_cast<std::size_t>(
      std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

Matrix rollout_latents(const ToyTransformer& model, const Matrix& patches,
                       const std::vector<TokenId>& query, std::size_t k) {
  require(k >= 1, ErrorCode::kPrecondition, "latent length must be >= 1");
  Matrix latents(0, model.config().d_model);
  for (std::size_t t = 0; t < k; ++t) {
    Sequence seq = make_sequence(patches, query, latents);
    ForwardResult fwd = model.forward(seq);
    std::vector<double> row(fwd.hidden.row(fwd.length - 1).begin(),
                            fwd.hidden.row(fwd.length - 1).end());
    for (double& v : row) v /= model.config().latent_scale();
    latents.append_row(row);
  }
  return latents;
}

EvalOutput evaluate_latents(const ToyTransformer& model, const Matrix& patches,
                            const std::vector<TokenId>& query,
                            const Matrix& latents) {
  require(latents.rows() >= 1, ErrorCode::kPrecondition, "need at least one latent");
  require(latents.cols() == model.config().d_model, ErrorCode::kDimensionMismatch,
          "latent width does not match the backend latent_dim");
  Sequence seq = make_sequence(patches, query, latents);
  ForwardResult fwd = model.forward(seq);

  EvalOutput out;
  const std::size_t k = latents.rows();
  const std::size_t vocab = model.config().vocab_size;
  out.latent_logits = Matrix(k, vocab);
  out.latent_end_logit_per_position.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    auto src = fwd.logits.row(seq.latent_begin() + i);
    std::copy(src.begin(), src.end(), out.latent_logits.row(i).begin());
    out.latent_end_logit_per_position[i] = src[Vocab::kLatentEnd];
  }
  const std::size_t n = seq.n_visual();
  out.qv_attention = Matrix(query.size(), n);
  for (std::size_t q = 0; q < query.size(); ++q) {
    for (std::size_t v = 0; v < n; ++v) {
      out.qv_attention(q, v) = fwd.attention(seq.query_begin() + q, v);
    }
  }
  out.visual_embeddings = model.project_patches(patches);
  return out;
}

DecodeOutput greedy_decode(const ToyTransformer& model, const Matrix& patches,
                           const std::vector<TokenId>& query,
                           const Matrix& latents, std::size_t max_len) {
  require(max_len >= 1, ErrorCode::kPrecondition, "max_len must be >= 1");
  require(latents.cols() == model.config().d_model, ErrorCode::kDimensionMismatch,
          "latent width does not match the backend latent_dim");
  Sequence seq = make_sequence(patches, query, latents);
  seq.has_latent_end = true;
  // Each prediction is made at one row; `predictions` counts them.
  std::size_t predictions = 0;
  ForwardResult fwd;
  while (true) {
    if (seq.length() > model.config().max_positions) break;
    fwd = model.forward(seq);
    const auto id = static_cast<TokenId>(argmax(fwd.logits.row(fwd.length - 1)));
    ++predictions;
    if (id == Vocab::kEos) break;
    seq.text.push_back(id);
    if (seq.text.size() >= max_len) break;
  }
  DecodeOutput out;
  out.token_ids = seq.text;
  if (predictions == 0) return out;
  if (fwd.length != seq.length()) {
    // The last emitted token was never fed back; rerun so every prediction
    // row exists in the attention matrix.
    if (seq.length() <= model.config().max_positions) fwd = model.forward(seq);
  }
  const std::size_t first = seq.latent_end_pos();
  const std::size_t rows = std::min(predictions, fwd.length - first);
  double latent_mass = 0.0;
  double visual_mass = 0.0;
  for (std::size_t r = first; r < first + rows; ++r) {
    auto row = fwd.attention.row(r);
    for (std::size_t v = 0; v < seq.n_visual(); ++v) visual_mass += row[v];
    for (std::size_t k = 0; k < latents.rows(); ++k) {
      latent_mass += row[seq.latent_begin() + k];
    }
  }
  out.attention_share_latent = latent_mass / static_cast<double>(rows);
  out.attention_share_visual = visual_mass / static_cast<double>(rows);
  return out;
}

ToyBackend::ToyBackend(std::shared_ptr<const ToyTransformer> model)
    : model_(std::move(model)) {
  require(model_ != nullptr, ErrorCode::kInvalidArgument, "null toy model");
}

std::unique_ptr<ToyBackend> ToyBackend::untrained(std::uint64_t seed,
                                                  const ModelConfig& cfg) {
  return std::make_unique<ToyBackend>(
      std::make_shared<const ToyTransformer>(cfg, Params::random(cfg, seed)));
}

BackendInfo ToyBackend::info() const {
  return BackendInfo{model_->config().d_model, model_->config().vocab_size,
                     Vocab::kLatentEnd, 0};
}

BackendContext ToyBackend::encode(const VisualSpec& visual, const QueryTokens& query) {
  visual.validate();
  const ModelConfig& cfg = model_->config();
  require(visual.patches.cols() == cfg.d_in, ErrorCode::kDimensionMismatch,
          "patch feature width does not match the backend input width");
  require(!query.ids.empty(), ErrorCode::kInvalidArgument, "empty query");
  for (TokenId id : query.ids) {
    require(id < cfg.vocab_size, ErrorCode::kInvalidArgument,
            "query token outside the vocabulary");
  }
  const std::size_t n = visual.n_patches();
  const std::size_t q = query.ids.size();
  require(n + q + 1 <= cfg.max_positions, ErrorCode::kInvalidArgument,
          "prompt does not fit the position table");

  BackendContext ctx;
  ctx.n_visual = n;
  ctx.visual_index_set.resize(n);
  std::iota(ctx.visual_index_set.begin(), ctx.visual_index_set.end(), 0);
  ctx.query_index_set.resize(q);
  std::iota(ctx.query_index_set.begin(), ctx.query_index_set.end(), n);
  ctx.seq_len = n + q;
  ctx.latent_dim = cfg.d_model;

  auto stored = std::make_shared<Stored>();
  stored->patches = visual.patches;
  stored->query = query.ids;
  std::lock_guard<std::mutex> lock(mu_);
  ctx.instance_id = "toy-" + std::to_string(next_id_++);
  contexts_.emplace(ctx.instance_id, std::move(stored));
  return ctx;
}

std::shared_ptr<const ToyBackend::Stored> ToyBackend::lookup(
    const BackendContext& ctx) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = contexts_.find(ctx.instance_id);
  if (it == contexts_.end()) fail(ErrorCode::kInvalidArgument, "unknown context");
  return it->second;
}

LatentState ToyBackend::initial_latents(const BackendContext& ctx, std::size_t k) {
  auto stored = lookup(ctx);
  return LatentState(rollout_latents(*model_, stored->patches, stored->query, k));
}

EvalOutput ToyBackend::evaluate(const BackendContext& ctx, const LatentState& latents) {
  auto stored = lookup(ctx);
  return evaluate_latents(*model_, stored->patches, stored->query, latents.vectors);
}

DecodeOutput ToyBackend::decode_answer(const BackendContext& ctx,
                                       const LatentState& latents,
                                       std::size_t max_len) {
  auto stored = lookup(ctx);
  return greedy_decode(*model_, stored->patches, stored->query, latents.vectors,
                       max_len);
}

void ToyBackend::close(const BackendContext& ctx) {
  std::lock_guard<std::mutex> lock(mu_);
  contexts_.erase(ctx.instance_id);
}

std::size_t ToyBackend::open_contexts() const {
  std::lock_guard<std::mutex> lock(mu_);
  return contexts_.size();
}

}  // namespace latentforge::toy
