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

#include "latentforge/backend/toy_trainer.hpp"

#include <unistd.h>

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "latentforge/linalg.hpp"
#include "latentforge/rng.hpp"
#include "latentforge/simd/kernels.hpp"

namespace latentforge::toy {
namespace {

using nlohmann::json;

Sequence answer_sequence(const ToyInstance& inst, const Matrix& latents) {
  Sequence seq;
  seq.patches = &inst.visual.patches;
  seq.query = &inst.query.ids;
  seq.latents = latents;
  seq.has_latent_end = true;
  seq.text = inst.gold_answer;
  return seq;
}

// -log softmax(row)[target]; adds weight * d/d(row) into `grad` if given.
double row_cross_entropy(std::span<const double> row, TokenId target, double weight,
                         std::span<double> grad) {
  double max_logit = row[0];
  for (double v : row) max_logit = std::max(max_logit, v);
  double total = 0.0;
  for (double v : row) total += std::exp(v - max_logit);
  const double log_z = max_logit + std::log(total);
  if (!grad.empty()) {
    for (std::size_t c = 0; c < row.size(); ++c) grad[c] += weight * std::exp(row[c] - log_z);
    grad[target] -= weight;
  }
  return log_z - row[target];
}

// Cross-entropy of the continuation; writes d(logits) scaled by `weight`.
double continuation_loss(const Sequence& seq, const ForwardResult& fwd,
                         const std::vector<TokenId>& targets, double weight,
                         Matrix* d_logits) {
  double nll = 0.0;
  const std::size_t first_row = seq.latent_end_pos() - 1;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    nll += row_cross_entropy(fwd.logits.row(first_row + t), targets[t], weight,
                             d_logits ? d_logits->row(first_row + t) : std::span<double>{});
  }
  return nll;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

Adam::Adam(const ModelConfig& cfg, Options opts)
    : opts_(opts), m_(Params::zeros(cfg)), v_(Params::zeros(cfg)) {}

void Adam::step(Params& params, const Params& grads,
                const std::function<bool(const std::string&)>& frozen) {
  ++t_;
  double sq = 0.0;
  grads.for_each([&](const std::string& name, const Matrix& g) {
    if (frozen && frozen(name)) return;
    for (double v : g.flat()) sq += v * v;
  });
  const double norm = std::sqrt(sq);
  const double clip =
      (opts_.clip_norm > 0.0 && norm > opts_.clip_norm) ? opts_.clip_norm / norm : 1.0;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));

  std::vector<const Matrix*> g_list;
  grads.for_each([&](const std::string&, const Matrix& g) { g_list.push_back(&g); });
  std::vector<Matrix*> m_list, v_list;
  m_.for_each([&](const std::string&, Matrix& m) { m_list.push_back(&m); });
  v_.for_each([&](const std::string&, Matrix& m) { v_list.push_back(&m); });
  std::size_t idx = 0;
  params.for_each([&](const std::string& name, Matrix& p) {
    const std::size_t i = idx++;
    if (frozen && frozen(name)) return;
    auto g = g_list[i]->flat();
    auto m = m_list[i]->flat();
    auto v = v_list[i]->flat();
    auto w = p.flat();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] * clip;
      m[j] = opts_.beta1 * m[j] + (1.0 - opts_.beta1) * gj;
      v[j] = opts_.beta2 * v[j] + (1.0 - opts_.beta2) * gj * gj;
      w[j] -= opts_.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + opts_.eps);
    }
  });
}

std::vector<TokenId> continuation_targets(const std::vector<TokenId>& answer) {
  std::vector<TokenId> out;
  out.reserve(answer.size() + 2);
  out.push_back(Vocab::kLatentEnd);
  out.insert(out.end(), answer.begin(), answer.end());
  out.push_back(Vocab::kEos);
  return out;
}

double answer_nll(const ToyTransformer& model, const ToyInstance& inst,
                  const Matrix& latents, Params* grads, double weight,
                  bool train_patch_projection, double query_weight) {
  Sequence seq = answer_sequence(inst, latents);
  ForwardResult fwd = model.forward(seq);
  const auto targets = continuation_targets(inst.gold_answer);
  if (grads == nullptr) return continuation_loss(seq, fwd, targets, weight, nullptr);
  Matrix d_logits(fwd.length, model.config().vocab_size);
  const double nll = continuation_loss(seq, fwd, targets, weight, &d_logits);
  if (query_weight > 0.0 && !inst.gold_answer.empty()) {
    // Every query row after the first also predicts the first answer token.
    for (std::size_t q = 1; q < inst.query.ids.size(); ++q) {
      const std::size_t r = seq.query_begin() + q;
      row_cross_entropy(fwd.logits.row(r), inst.gold_answer.front(),
                        weight * query_weight, d_logits.row(r));
    }
  }
  Matrix d_hidden(fwd.length, model.config().d_model);
  Matrix d_emb = model.backward(fwd, d_hidden, &d_logits, *grads);
  model.backward_embed(seq, d_emb, *grads, train_patch_projection);
  return nll;
}

Matrix clue_targets(const ToyTransformer& model, const ToyInstance& inst,
                    std::size_t k) {
  const Matrix visual = model.project_patches(inst.visual.patches);
  const auto groups = clue_groups(inst.relevant_patches, k);
  Matrix clues(k, model.config().d_model);
  for (std::size_t i = 0; i < k; ++i) {
    auto dst = clues.row(i);
    const double inv =
        1.0 / (static_cast<double>(groups[i].size()) * model.config().latent_scale());
    for (std::size_t p : groups[i]) simd::axpy(inv, visual.row(p), dst);
  }
  return clues;
}

JointTerms joint_objective_grad(const ToyTransformer& model,
                                const ToyInstance& inst, std::size_t k,
                                double lambda, Params& grads, double weight) {
  const std::size_t d = model.config().d_model;
  const double latent_scale = model.config().latent_scale();
  const Matrix latents = rollout_latents(model, inst.visual.patches, inst.query.ids, k);
  const Matrix clues = clue_targets(model, inst, k);
  Sequence seq = answer_sequence(inst, latents);
  ForwardResult fwd = model.forward(seq);

  JointTerms terms;
  // h_k is the output row one before its own input slot.
  auto output_row = [&](std::size_t latent) { return seq.latent_start_pos() + latent; };
  Matrix d_hidden(fwd.length, d);
  const double inv_k = 1.0 / static_cast<double>(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = latents(i, c) - clues(i, c);
      terms.alignment += inv_k * diff * diff;
      d_hidden(output_row(i), c) = weight * 2.0 * inv_k * diff / latent_scale;
    }
  }
  Matrix d_logits(fwd.length, model.config().vocab_size);
  terms.answer_nll = continuation_loss(seq, fwd, continuation_targets(inst.gold_answer),
                                       lambda * weight, &d_logits);

  // Gradient arriving at latent input slot i flows on into output row i;
  // each pass only reaches strictly earlier slots, so k passes suffice.
  Matrix d_emb = model.backward(fwd, d_hidden, &d_logits, grads);
  Matrix d_latents = model.backward_embed(seq, d_emb, grads, false);
  for (std::size_t pass = 0; pass < k; ++pass) {
    Matrix seed(fwd.length, d);
    bool any = false;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        seed(output_row(i), c) = d_latents(i, c) / latent_scale;
        any = any || d_latents(i, c) != 0.0;
      }
    }
    if (!any) break;
    d_emb = model.backward(fwd, seed, nullptr, grads);
    d_latents = model.backward_embed(seq, d_emb, grads, false);
  }
  return terms;
}

std::shared_ptr<const ToyTransformer> pretrain_toy_model(const PretrainConfig& cfg,
                                                         const ModelConfig& model_cfg) {
  require(cfg.task.d_in() == model_cfg.d_in, ErrorCode::kDimensionMismatch,
          "task feature width does not match the model input width");
  ToyTransformer model(model_cfg, Params::random(model_cfg, cfg.seed));
  Adam adam(model_cfg, Adam::Options{.learning_rate = cfg.learning_rate});
  Rng rng(mix64(cfg.seed ^ 0x7072657472616e31ULL));
  const double scale = 1.0 / static_cast<double>(cfg.batch);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Params grads = Params::zeros(model_cfg);
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      // Training seeds live above 2^40, away from evaluation seeds.
      const ToyInstance inst = toy_task_sample((1ULL << 40) + rng.next_u64() % (1ULL << 40),
                                               cfg.task);
      Matrix latents;
      if (rng.uniform() < cfg.clue_probability) {
        latents = clue_targets(model, inst, cfg.k);
        const double gain = 0.5 + 1.5 * rng.uniform();
        const double noise = 0.3 / model_cfg.latent_scale();
        for (double& v : latents.flat()) v = gain * v + noise * rng.normal();
      } else {
        latents = rollout_latents(model, inst.visual.patches, inst.query.ids, cfg.k);
      }
      answer_nll(model, inst, latents, &grads, scale, true, cfg.query_answer_weight);
    }
    adam.step(model.mutable_params(), grads);
  }
  return std::make_shared<const ToyTransformer>(std::move(model));
}

void save_params(const Params& params, const ModelConfig& cfg,
                 const std::filesystem::path& path) {
  json j;
  j["format"] = "latentforge-toy-checkpoint";
  j["version"] = 1;
  j["config"] = {{"d_in", cfg.d_in},         {"d_model", cfg.d_model},
                 {"n_heads", cfg.n_heads},   {"n_layers", cfg.n_layers},
                 {"d_ff", cfg.d_ff},         {"vocab_size", cfg.vocab_size},
                 {"max_positions", cfg.max_positions}};
  json tensors = json::object();
  params.for_each([&](const std::string& name, const Matrix& m) {
    tensors[name] = {{"rows", m.rows()},
                     {"cols", m.cols()},
                     {"data", std::vector<double>(m.flat().begin(), m.flat().end())}};
  });
  j["tensors"] = std::move(tensors);
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp);
    out << j.dump();
  }
  std::filesystem::rename(tmp, path);
}

Params load_params(const ModelConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), e.byte);
  }
  Params p = Params::zeros(cfg);
  const json& tensors = j.at("tensors");
  p.for_each([&](const std::string& name, Matrix& m) {
    const json& t = tensors.at(name);
    require(t.at("rows").get<std::size_t>() == m.rows() &&
                t.at("cols").get<std::size_t>() == m.cols(),
            ErrorCode::kDimensionMismatch, "checkpoint tensor shape");
    const auto data = t.at("data").get<std::vector<double>>();
    std::copy(data.begin(), data.end(), m.flat().begin());
  });
  return p;
}

std::filesystem::path default_cache_dir() {
  if (const char* env = std::getenv("LATENTFORGE_CACHE"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) {
    return std::filesystem::path(home) / ".cache" / "latentforge";
  }
  return ".latentforge-cache";
}

std::shared_ptr<const ToyTransformer> load_or_pretrain(
    const PretrainConfig& cfg, const ModelConfig& model_cfg,
    const std::filesystem::path& cache_dir) {
  std::ostringstream key;
  key << "v5/" << cfg.seed << '/' << cfg.steps << '/' << cfg.batch << '/'
      << cfg.learning_rate << '/' << cfg.k << '/' << cfg.clue_probability << '/'
      << cfg.task.grid_rows << 'x' << cfg.task.grid_cols << '/' << cfg.task.n_colors
      << '/' << cfg.task.n_shapes << '/' << cfg.task.n_objects << '/'
      << cfg.task.object_side << '/' << cfg.task.feature_noise << '/'
      << cfg.query_answer_weight << '/'
      << model_cfg.d_in << '/' << model_cfg.d_model << '/' << model_cfg.n_heads << '/'
      << model_cfg.n_layers << '/' << model_cfg.d_ff << '/' << model_cfg.vocab_size
      << '/' << model_cfg.max_positions;
  const auto path = cache_dir / ("toy-" + hex64(fnv1a64(key.str())) + ".json");
  if (std::filesystem::exists(path)) {
    return std::make_shared<const ToyTransformer>(model_cfg, load_params(model_cfg, path));
  }
  auto model = pretrain_toy_model(cfg, model_cfg);
  try {
    save_params(model->params(), model_cfg, path);
  } catch (const std::exception& e) {
    spdlog::warn("toy checkpoint cache not written: {}", e.what());
  }
  return model;
}

std::unique_ptr<ToyBackend> pretrained_toy_backend(std::uint64_t seed) {
  PretrainConfig cfg;
  cfg.seed = seed;
  return std::make_unique<ToyBackend>(load_or_pretrain(cfg));
}

double toy_accuracy(const ToyTransformer& model,
                    const std::vector<ToyInstance>& instances, std::size_t k,
                    const ToyTransformer* latent_source) {
  if (instances.empty()) return 0.0;
  const ToyTransformer& source = latent_source ? *latent_source : model;
  std::size_t correct = 0;
  for (const auto& inst : instances) {
    const Matrix latents =
        rollout_latents(source, inst.visual.patches, inst.query.ids, k);
    const DecodeOutput out = greedy_decode(model, inst.visual.patches, inst.query.ids,
                                           latents, inst.gold_answer.size() + 1);
    if (out.token_ids == inst.gold_answer) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(instances.size());
}

}  // namespace latentforge::toy
