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

// A small pre-LayerNorm causal transformer over mixed inputs: projected
// visual patches, text tokens, and raw continuous latent vectors. Forward
// records attention probabilities; backward is hand-derived and exposes
// gradients for parameters and for the input rows.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "latentforge/backend/types.hpp"
#include "latentforge/tensor.hpp"

namespace latentforge::toy {

// Reserved vocabulary layout.
struct Vocab {
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kLatentStart = 2;
  static constexpr TokenId kLatentEnd = 3;
  static constexpr TokenId kAskShape = 4;
  static constexpr TokenId kQuestionMark = 5;
  static constexpr TokenId kColorBase = 8;
  static constexpr TokenId kShapeBase = 16;
};

struct ModelConfig {
  std::size_t d_in = 16;
  std::size_t d_model = 32;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ff = 128;
  std::size_t vocab_size = 64;
  std::size_t max_positions = 64;

  // Latent vectors are exchanged at 1/latent_scale() of the hidden-state
  // scale: a latent input row is latent * latent_scale(), and the latent
  // read from an output row is hidden / latent_scale().
  double latent_scale() const { return std::sqrt(static_cast<double>(d_model)); }
};

struct LayerParams {
  Matrix ln1_gain, ln1_bias;
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix ln2_gain, ln2_bias;
  Matrix w1, b1, w2, b2;
};

struct Params {
  Matrix token_embedding;     // vocab x d
  Matrix position_embedding;  // max_positions x d
  Matrix patch_proj_w;        // d_in x d
  Matrix patch_proj_b;        // 1 x d
  std::vector<LayerParams> layers;
  Matrix lnf_gain, lnf_bias;
  Matrix out_w;  // d x vocab
  Matrix out_b;  // 1 x vocab

  // Zero-filled parameters of the given shape.
  static Params zeros(const ModelConfig& cfg);
  static Params random(const ModelConfig& cfg, std::uint64_t seed);

  // Visits every tensor in a fixed order with a stable name.
  template <class Fn>
  void for_each(Fn&& fn) {
    visit(*this, fn);
  }
  template <class Fn>
  void for_each(Fn&& fn) const {
    visit(*this, fn);
  }

  std::size_t parameter_count() const;

 private:
  template <class Self, class Fn>
  static void visit(Self& p, Fn& fn) {
    fn("token_embedding", p.token_embedding);
    fn("position_embedding", p.position_embedding);
    fn("patch_proj_w", p.patch_proj_w);
    fn("patch_proj_b", p.patch_proj_b);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto& L = p.layers[l];
      const std::string pre = "layer" + std::to_string(l) + ".";
      fn(pre + "ln1_gain", L.ln1_gain);
      fn(pre + "ln1_bias", L.ln1_bias);
      fn(pre + "wq", L.wq);
      fn(pre + "bq", L.bq);
      fn(pre + "wk", L.wk);
      fn(pre + "bk", L.bk);
      fn(pre + "wv", L.wv);
      fn(pre + "bv", L.bv);
      fn(pre + "wo", L.wo);
      fn(pre + "bo", L.bo);
      fn(pre + "ln2_gain", L.ln2_gain);
      fn(pre + "ln2_bias", L.ln2_bias);
      fn(pre + "w1", L.w1);
      fn(pre + "b1", L.b1);
      fn(pre + "w2", L.w2);
      fn(pre + "b2", L.b2);
    }
    fn("lnf_gain", p.lnf_gain);
    fn("lnf_bias", p.lnf_bias);
    fn("out_w", p.out_w);
    fn("out_b", p.out_b);
  }
};

// One input sequence:
//   [patches N][query Q][<latent_start>][latents K]
//   then, if has_latent_end: [<latent_end>][text...]
struct Sequence {
  const Matrix* patches = nullptr;
  const std::vector<TokenId>* query = nullptr;
  Matrix latents;
  bool has_latent_end = false;
  std::vector<TokenId> text;

  std::size_t n_visual() const { return patches->rows(); }
  std::size_t query_begin() const { return n_visual(); }
  std::size_t latent_start_pos() const { return n_visual() + query->size(); }
  std::size_t latent_begin() const { return latent_start_pos() + 1; }
  std::size_t latent_end_pos() const { return latent_begin() + latents.rows(); }
  std::size_t length() const {
    return latent_end_pos() + (has_latent_end ? 1 + text.size() : 0);
  }
};

struct LayerNormCache {
  Matrix normalized;            // xhat
  std::vector<double> inv_std;  // per row
};

struct LayerCache {
  Matrix x_in;
  LayerNormCache ln1;
  Matrix a_in, q, k, v;
  std::vector<Matrix> probs;  // per head, M x M (lower triangular)
  Matrix context;
  Matrix x_mid;
  LayerNormCache ln2;
  Matrix m_in, pre_act, act;
};

struct ForwardResult {
  Matrix hidden;     // M x d, final LayerNorm output
  Matrix logits;     // M x vocab
  Matrix attention;  // M x M, mean over layers and heads
  std::vector<LayerCache> layers;
  Matrix x_final;
  LayerNormCache lnf;
  std::size_t length = 0;
};

class ToyTransformer {
 public:
  ToyTransformer(ModelConfig cfg, Params params);

  const ModelConfig& config() const { return cfg_; }
  const Params& params() const { return params_; }
  Params& mutable_params() { return params_; }

  // Input rows before positional embeddings are added.
  Matrix embed(const Sequence& seq) const;
  // Projected visual embeddings, N x d.
  Matrix project_patches(const Matrix& patches) const;

  ForwardResult forward(const Matrix& embeddings) const;
  ForwardResult forward(const Sequence& seq) const { return forward(embed(seq)); }

  // Backpropagates d(hidden) and, when non-null, d(logits). Parameter grads
  // are accumulated into `grads`; the return value is d(embeddings).
  Matrix backward(const ForwardResult& fwd, const Matrix& d_hidden,
                  const Matrix* d_logits, Params& grads) const;

  // Routes d(embeddings) into token/patch-projection grads; returns the
  // latent-row gradient (K x d).
  Matrix backward_embed(const Sequence& seq, const Matrix& d_embeddings,
                        Params& grads, bool train_patch_projection = true) const;

 private:
  ModelConfig cfg_;
  Params params_;
};

}  // namespace latentforge::toy
