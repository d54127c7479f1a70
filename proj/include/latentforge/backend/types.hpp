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

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "latentforge/tensor.hpp"

namespace latentforge {

using TokenId = std::uint32_t;

// N patches of d_in features laid out on a rows x cols grid.
struct VisualSpec {
  Matrix patches;
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;

  std::size_t n_patches() const { return patches.rows(); }
  // Throws on N == 0, grid mismatch, or non-finite features.
  void validate() const;
};

struct QueryTokens {
  std::vector<TokenId> ids;
};

// An encoded (visual, query) instance. The index sets address positions of
// the prompt; latents are appended after them.
struct BackendContext {
  std::string instance_id;
  std::size_t n_visual = 0;
  std::vector<std::size_t> visual_index_set;
  std::vector<std::size_t> query_index_set;
  std::size_t seq_len = 0;
  std::size_t latent_dim = 0;

  // Throws when the index sets overlap, have the wrong size, or overflow M.
  void validate() const;
};

// K x d continuous latent vectors.
struct LatentState {
  Matrix vectors;

  LatentState() = default;
  explicit LatentState(Matrix m) : vectors(std::move(m)) {}

  std::size_t k() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }

  friend bool operator==(const LatentState&, const LatentState&) = default;
};

struct EvalOutput {
  Matrix latent_logits;        // K x vocab
  Matrix qv_attention;         // |I_Q| x N, averaged over layers and heads
  Matrix visual_embeddings;    // N x d
  std::vector<double> latent_end_logit_per_position;  // K

  friend bool operator==(const EvalOutput&, const EvalOutput&) = default;
};

struct DecodeOutput {
  std::vector<TokenId> token_ids;
  double attention_share_latent = 0.0;
  double attention_share_visual = 0.0;

  friend bool operator==(const DecodeOutput&, const DecodeOutput&) = default;
};

// Capabilities a backend declares up front.
struct BackendInfo {
  std::size_t latent_dim = 0;
  std::size_t vocab_size = 0;
  TokenId latent_end_id = 0;
  // 0 means unbounded.
  std::size_t max_contexts = 0;
};

}  // namespace latentforge
