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

#include "latentforge/backend/toy_transformer.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "latentforge/linalg.hpp"
#include "latentforge/rng.hpp"
#include "latentforge/simd/kernels.hpp"

namespace latentforge::toy {
namespace {

constexpr double kLayerNormEps = 1e-5;

Matrix row_vector(std::size_t n, double fill) { return Matrix(1, n, fill); }

void fill_normal(Matrix& m, Rng& rng, double stddev) {
  for (double& v : m.flat()) v = stddev * rng.normal();
}

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                  LayerNormCache& cache) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  Matrix out(n, d);
  cache.normalized = Matrix(n, d);
  cache.inv_std.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std[r] = inv_std;
    for (std::size_t c = 0; c < d; ++c) {
      const double xhat = (row[c] - mean) * inv_std;
      cache.normalized(r, c) = xhat;
      out(r, c) = xhat * gain(0, c) + bias(0, c);
    }
  }
  return out;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& gain,
                           const LayerNormCache& cache, Matrix& d_gain,
                           Matrix& d_bias) {
  const std::size_t n = dy.rows();
  const std::size_t d = dy.cols();
  Matrix dx(n, d);
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < n; ++r) {
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double g = dy(r, c);
      const double xhat = cache.normalized(r, c);
      d_gain(0, c) += g * xhat;
      d_bias(0, c) += g;
      dxhat[c] = g * gain(0, c);
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * xhat;
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      dx(r, c) = cache.inv_std[r] *
                 (dxhat[c] - mean_dxhat - cache.normalized(r, c) * mean_dxhat_xhat);
    }
  }
  return dx;
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = matmul(x, w);
  add_row_bias(y, b.row(0));
  return y;
}

void affine_backward_params(const Matrix& x, const Matrix& dy, Matrix& dw,
                            Matrix& db) {
  accumulate_xt_dy(dw, x, dy);
  accumulate_column_sums(db.row(0), dy);
}

void add_into(Matrix& acc, const Matrix& x) {
  simd::axpy(1.0, x.flat(), acc.flat());
}

}  // namespace

Params Params::zeros(const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model;
  Params p;
  p.token_embedding = Matrix(cfg.vocab_size, d);
  p.position_embedding = Matrix(cfg.max_positions, d);
  p.patch_proj_w = Matrix(cfg.d_in, d);
  p.patch_proj_b = row_vector(d, 0.0);
  p.layers.resize(cfg.n_layers);
  for (auto& L : p.layers) {
    L.ln1_gain = row_vector(d, 0.0);
    L.ln1_bias = row_vector(d, 0.0);
    L.wq = Matrix(d, d);
    L.bq = row_vector(d, 0.0);
    L.wk = Matrix(d, d);
    L.bk = row_vector(d, 0.0);
    L.wv = Matrix(d, d);
    L.bv = row_vector(d, 0.0);
    L.wo = Matrix(d, d);
    L.bo = row_vector(d, 0.0);
    L.ln2_gain = row_vector(d, 0.0);
    L.ln2_bias = row_vector(d, 0.0);
    L.w1 = Matrix(d, cfg.d_ff);
    L.b1 = row_vector(cfg.d_ff, 0.0);
    L.w2 = Matrix(cfg.d_ff, d);
    L.b2 = row_vector(d, 0.0);
  }
  p.lnf_gain = row_vector(d, 0.0);
  p.lnf_bias = row_vector(d, 0.0);
  p.out_w = Matrix(d, cfg.vocab_size);
  p.out_b = row_vector(cfg.vocab_size, 0.0);
  return p;
}

Params Params::random(const ModelConfig& cfg, std::uint64_t seed) {
  Params p = zeros(cfg);
  Rng rng(seed);
  const double d = static_cast<double>(cfg.d_model);
  const double residual_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.n_layers));
  fill_normal(p.token_embedding, rng, 1.0);
  fill_normal(p.position_embedding, rng, 0.1);
  fill_normal(p.patch_proj_w, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d_in)));
  for (auto& L : p.layers) {
    L.ln1_gain.fill(1.0);
    L.ln2_gain.fill(1.0);
    fill_normal(L.wq, rng, 1.0 / std::sqrt(d));
    fill_normal(L.wk, rng, 1.0 / std::sqrt(d));
    fill_normal(L.wv, rng, 1.0 / std::sqrt(d));
    fill_normal(L.wo, rng, residual_scale / std::sqrt(d));
    fill_normal(L.w1, rng, 1.0 / std::sqrt(d));
    fill_normal(L.w2, rng,
                residual_scale / std::sqrt(static_cast<double>(cfg.d_ff)));
  }
  p.lnf_gain.fill(1.0);
  fill_normal(p.out_w, rng, 1.0 / std::sqrt(d));
  return p;
}

std::size_t Params::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

ToyTransformer::ToyTransformer(ModelConfig cfg, Params params)
    : cfg_(cfg), params_(std::move(params)) {
  require(cfg_.d_model % cfg_.n_heads == 0, ErrorCode::kInvalidArgument,
          "d_model must be divisible by n_heads");
}

Matrix ToyTransformer::project_patches(const Matrix& patches) const {
  require(patches.cols() == cfg_.d_in, ErrorCode::kDimensionMismatch,
          "patch feature width does not match the backend input width");
  return affine(patches, params_.patch_proj_w, params_.patch_proj_b);
}

Matrix ToyTransformer::embed(const Sequence& seq) const {
  const std::size_t d = cfg_.d_model;
  const std::size_t m = seq.length();
  require(m <= cfg_.max_positions, ErrorCode::kInvalidArgument,
          "sequence exceeds the model's position table");
  require(seq.latents.rows() == 0 || seq.latents.cols() == d,
          ErrorCode::kDimensionMismatch, "latent width does not match d_model");
  Matrix out(m, d);
  const Matrix visual = project_patches(*seq.patches);
  auto copy_row = [&](std::size_t pos, std::span<const double> src) {
    std::copy(src.begin(), src.end(), out.row(pos).begin());
  };
  auto token_row = [&](std::size_t pos, TokenId id) {
    require(id < cfg_.vocab_size, ErrorCode::kInvalidArgument,
            "token id outside the vocabulary");
    copy_row(pos, params_.token_embedding.row(id));
  };
  for (std::size_t n = 0; n < visual.rows(); ++n) copy_row(n, visual.row(n));
  for (std::size_t q = 0; q < seq.query->size(); ++q) {
    token_row(seq.query_begin() + q, (*seq.query)[q]);
  }
  token_row(seq.latent_start_pos(), Vocab::kLatentStart);
  const double latent_scale = cfg_.latent_scale();
  for (std::size_t k = 0; k < seq.latents.rows(); ++k) {
    auto dst = out.row(seq.latent_begin() + k);
    const auto src = seq.latents.row(k);
    for (std::size_t c = 0; c < d; ++c) dst[c] = latent_scale * src[c];
  }
  if (seq.has_latent_end) {
    token_row(seq.latent_end_pos(), Vocab::kLatentEnd);
    for (std::size_t t = 0; t < seq.text.size(); ++t) {
      token_row(seq.latent_end_pos() + 1 + t, seq.text[t]);
    }
  }
  return out;
}

ForwardResult ToyTransformer::forward(const Matrix& embeddings) const {
  const std::size_t m = embeddings.rows();
  const std::size_t d = cfg_.d_model;
  const std::size_t heads = cfg_.n_heads;
  const std::size_t dh = d / heads;
  require(embeddings.cols() == d, ErrorCode::kDimensionMismatch,
          "embedding width does not match d_model");
  require(m >= 1 && m <= cfg_.max_positions, ErrorCode::kInvalidArgument,
          "sequence length out of range");
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto& kern = simd::active_kernels();

  ForwardResult fwd;
  fwd.length = m;
  fwd.attention = Matrix(m, m);
  Matrix x = embeddings;
  for (std::size_t p = 0; p < m; ++p) {
    kern.axpy(1.0, params_.position_embedding.row(p).data(), x.row(p).data(), d);
  }

  std::vector<double> scores(m);
  for (const LayerParams& L : params_.layers) {
    LayerCache c;
    c.x_in = x;
    c.a_in = layer_norm(x, L.ln1_gain, L.ln1_bias, c.ln1);
    c.q = affine(c.a_in, L.wq, L.bq);
    c.k = affine(c.a_in, L.wk, L.bk);
    c.v = affine(c.a_in, L.wv, L.bv);
    c.context = Matrix(m, d);
    c.probs.assign(heads, Matrix(m, m));
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      Matrix& probs = c.probs[h];
      for (std::size_t i = 0; i < m; ++i) {
        const double* qi = c.q.row(i).data() + off;
        double max_score = -INFINITY;
        for (std::size_t j = 0; j <= i; ++j) {
          scores[j] = scale * kern.dot(qi, c.k.row(j).data() + off, dh);
          max_score = std::max(max_score, scores[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          scores[j] = std::exp(scores[j] - max_score);
          total += scores[j];
        }
        double* ctx = c.context.row(i).data() + off;
        for (std::size_t j = 0; j <= i; ++j) {
          const double pij = scores[j] / total;
          probs(i, j) = pij;
          kern.axpy(pij, c.v.row(j).data() + off, ctx, dh);
        }
      }
      add_into(fwd.attention, probs);
    }
    Matrix attn_out = affine(c.context, L.wo, L.bo);
    add_into(x, attn_out);
    c.x_mid = x;
    c.m_in = layer_norm(x, L.ln2_gain, L.ln2_bias, c.ln2);
    c.pre_act = affine(c.m_in, L.w1, L.b1);
    c.act = c.pre_act;
    for (double& v : c.act.flat()) v = v > 0.0 ? v : 0.0;
    Matrix mlp_out = affine(c.act, L.w2, L.b2);
    add_into(x, mlp_out);
    fwd.layers.push_back(std::move(c));
  }
  const double inv_maps = 1.0 / static_cast<double>(params_.layers.size() * heads);
  for (double& v : fwd.attention.flat()) v *= inv_maps;

  fwd.x_final = x;
  fwd.hidden = layer_norm(x, params_.lnf_gain, params_.lnf_bias, fwd.lnf);
  fwd.logits = affine(fwd.hidden, params_.out_w, params_.out_b);
  return fwd;
}

Matrix ToyTransformer::backward(const ForwardResult& fwd, const Matrix& d_hidden,
                                const Matrix* d_logits, Params& grads) const {
  const std::size_t m = fwd.length;
  const std::size_t d = cfg_.d_model;
  const std::size_t heads = cfg_.n_heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto& kern = simd::active_kernels();
  require(d_hidden.rows() == m && d_hidden.cols() == d,
          ErrorCode::kDimensionMismatch, "d_hidden shape");

  Matrix d_out = d_hidden;
  if (d_logits != nullptr) {
    require(d_logits->rows() == m && d_logits->cols() == cfg_.vocab_size,
            ErrorCode::kDimensionMismatch, "d_logits shape");
    affine_backward_params(fwd.hidden, *d_logits, grads.out_w, grads.out_b);
    add_into(d_out, matmul_transposed(*d_logits, params_.out_w));
  }
  Matrix dx = layer_norm_backward(d_out, params_.lnf_gain, fwd.lnf,
                                  grads.lnf_gain, grads.lnf_bias);

  std::vector<double> d_probs(m);
  for (std::size_t l = params_.layers.size(); l-- > 0;) {
    const LayerParams& L = params_.layers[l];
    LayerParams& G = grads.layers[l];
    const LayerCache& c = fwd.layers[l];

    // MLP branch.
    affine_backward_params(c.act, dx, G.w2, G.b2);
    Matrix d_pre = matmul_transposed(dx, L.w2);
    for (std::size_t i = 0; i < d_pre.size(); ++i) {
      if (c.pre_act.flat()[i] <= 0.0) d_pre.flat()[i] = 0.0;
    }
    affine_backward_params(c.m_in, d_pre, G.w1, G.b1);
    Matrix d_m_in = matmul_transposed(d_pre, L.w1);
    add_into(dx, layer_norm_backward(d_m_in, L.ln2_gain, c.ln2, G.ln2_gain,
                                     G.ln2_bias));

    // Attention branch.
    affine_backward_params(c.context, dx, G.wo, G.bo);
    Matrix d_ctx = matmul_transposed(dx, L.wo);
    Matrix dq(m, d), dk(m, d), dv(m, d);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      const Matrix& probs = c.probs[h];
      for (std::size_t i = 0; i < m; ++i) {
        const double* g = d_ctx.row(i).data() + off;
        double weighted = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          d_probs[j] = kern.dot(g, c.v.row(j).data() + off, dh);
          weighted += probs(i, j) * d_probs[j];
          kern.axpy(probs(i, j), g, dv.row(j).data() + off, dh);
        }
        double* dqi = dq.row(i).data() + off;
        const double* qi = c.q.row(i).data() + off;
        for (std::size_t j = 0; j <= i; ++j) {
          const double d_score = probs(i, j) * (d_probs[j] - weighted) * scale;
          if (d_score == 0.0) continue;
          kern.axpy(d_score, c.k.row(j).data() + off, dqi, dh);
          kern.axpy(d_score, qi, dk.row(j).data() + off, dh);
        }
      }
    }
    affine_backward_params(c.a_in, dq, G.wq, G.bq);
    affine_backward_params(c.a_in, dk, G.wk, G.bk);
    affine_backward_params(c.a_in, dv, G.wv, G.bv);
    Matrix d_a_in = matmul_transposed(dq, L.wq);
    add_into(d_a_in, matmul_transposed(dk, L.wk));
    add_into(d_a_in, matmul_transposed(dv, L.wv));
    add_into(dx, layer_norm_backward(d_a_in, L.ln1_gain, c.ln1, G.ln1_gain,
                                     G.ln1_bias));
  }

  for (std::size_t p = 0; p < m; ++p) {
    kern.axpy(1.0, dx.row(p).data(), grads.position_embedding.row(p).data(), d);
  }
  return dx;
}

Matrix ToyTransformer::backward_embed(const Sequence& seq, const Matrix& d_emb,
                                      Params& grads,
                                      bool train_patch_projection) const {
  const std::size_t d = cfg_.d_model;
  const auto& kern = simd::active_kernels();
  const std::size_t n = seq.n_visual();
  if (train_patch_projection) {
    Matrix d_visual(n, d);
    for (std::size_t r = 0; r < n; ++r) {
      std::copy(d_emb.row(r).begin(), d_emb.row(r).end(), d_visual.row(r).begin());
    }
    affine_backward_params(*seq.patches, d_visual, grads.patch_proj_w,
                           grads.patch_proj_b);
  }
  auto token_grad = [&](std::size_t pos, TokenId id) {
    kern.axpy(1.0, d_emb.row(pos).data(), grads.token_embedding.row(id).data(), d);
  };
  for (std::size_t q = 0; q < seq.query->size(); ++q) {
    token_grad(seq.query_begin() + q, (*seq.query)[q]);
  }
  token_grad(seq.latent_start_pos(), Vocab::kLatentStart);
  if (seq.has_latent_end) {
    token_grad(seq.latent_end_pos(), Vocab::kLatentEnd);
    for (std::size_t t = 0; t < seq.text.size(); ++t) {
      token_grad(seq.latent_end_pos() + 1 + t, seq.text[t]);
    }
  }
  Matrix d_latents(seq.latents.rows(), d);
  for (std::size_t k = 0; k < seq.latents.rows(); ++k) {
    const auto src = d_emb.row(seq.latent_begin() + k);
    auto dst = d_latents.row(k);
    for (std::size_t c = 0; c < d; ++c) dst[c] = cfg_.latent_scale() * src[c];
  }
  return d_latents;
}

}  // namespace latentforge::toy
