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

#include "latentforge/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "latentforge/backend/toy_backend.hpp"
#include "latentforge/backend/toy_trainer.hpp"
#include "latentforge/error.hpp"
#include "latentforge/rng.hpp"

namespace latentforge::diagnostics {
namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

// Joint-training draws live in [2^41, 2^42), probes in [2^42, 2^43).
std::uint64_t train_seed(Rng& rng) { return (1ULL << 41) + rng.next_u64() % (1ULL << 41); }

std::vector<toy::ToyInstance> probe_set(const JointTrainConfig& cfg) {
  std::vector<toy::ToyInstance> out;
  for (std::size_t i = 0; i < cfg.probe_instances; ++i) {
    const std::uint64_t s =
        (1ULL << 42) + derive_seed(cfg.seed, "probe-" + std::to_string(i)) % (1ULL << 42);
    out.push_back(toy::toy_task_sample(s, cfg.task));
  }
  return out;
}

SilencingCheckpoint score(const toy::ToyTransformer& model, const toy::ToyTransformer& initial,
                          const std::vector<toy::ToyInstance>& probes, std::size_t k,
                          double lambda, std::size_t step) {
  SilencingCheckpoint c;
  c.step = step;
  std::size_t joint_correct = 0;
  std::size_t donated_correct = 0;
  for (const auto& inst : probes) {
    const Matrix latents = toy::rollout_latents(model, inst.visual.patches, inst.query.ids, k);
    const Matrix clues = toy::clue_targets(model, inst, k);
    c.alignment_loss += joint_loss(latents, clues, 0.0, lambda);
    c.answer_nll += toy::answer_nll(model, inst, latents);
    const EvalOutput eval =
        toy::evaluate_latents(model, inst.visual.patches, inst.query.ids, latents);
    c.latent_end_logit += eval.latent_end_logit_per_position.front();

    const std::size_t max_len = inst.gold_answer.size() + 1;
    const DecodeOutput joint =
        toy::greedy_decode(model, inst.visual.patches, inst.query.ids, latents, max_len);
    const AttentionShare share = attention_share(joint);
    c.attention_share_latent += share.latent;
    c.attention_share_visual += share.visual;
    if (joint.token_ids == inst.gold_answer) ++joint_correct;
    const DecodeOutput donated =
        toy::greedy_decode(initial, inst.visual.patches, inst.query.ids, latents, max_len);
    if (donated.token_ids == inst.gold_answer) ++donated_correct;
  }
  const double n = static_cast<double>(probes.size());
  c.alignment_loss /= n;
  c.answer_nll /= n;
  c.latent_end_logit /= n;
  c.attention_share_latent /= n;
  c.attention_share_visual /= n;
  c.joint_model_accuracy = static_cast<double>(joint_correct) / n;
  c.donated_latents_accuracy = static_cast<double>(donated_correct) / n;
  return c;
}

}  // namespace

double joint_loss(const Matrix& latents, const Matrix& clues, double answer_nll,
                  double lambda) {
  require(latents.rows() == clues.rows() && latents.cols() == clues.cols(),
          ErrorCode::kDimensionMismatch, "latents and clues differ in shape");
  require(latents.rows() >= 1, ErrorCode::kInvalidArgument, "no latents");
  require(answer_nll >= 0.0, ErrorCode::kInvalidArgument, "answer_nll must be >= 0");
  require(lambda >= 0.0, ErrorCode::kInvalidArgument, "lambda must be >= 0");
  double sq = 0.0;
  for (std::size_t i = 0; i < latents.rows(); ++i) {
    for (std::size_t c = 0; c < latents.cols(); ++c) {
      const double diff = latents(i, c) - clues(i, c);
      sq += diff * diff;
    }
  }
  return sq / static_cast<double>(latents.rows()) + lambda * answer_nll;
}

AttentionShare attention_share(const DecodeOutput& decoded) {
  const double l = decoded.attention_share_latent;
  const double v = decoded.attention_share_visual;
  require(std::isfinite(l) && std::isfinite(v) && l >= 0.0 && v >= 0.0 && l <= 1.0 &&
              v <= 1.0 && l + v <= 1.0 + 1e-6,
          ErrorCode::kInvalidArgument, "attention shares out of range");
  return {l, v};
}

double efficiency_ratio(double mean_gain, double mean_output_tokens) {
  require(mean_output_tokens > 0.0, ErrorCode::kInvalidArgument,
          "mean_output_tokens must be > 0");
  return mean_gain / mean_output_tokens * 10.0;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), ErrorCode::kDimensionMismatch, "series differ in length");
  require(x.size() >= 2, ErrorCode::kInvalidArgument, "need at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

void JointTrainConfig::validate() const {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::kInvalidArgument,
          "lambda must be a finite value >= 0");
  require(steps >= 1, ErrorCode::kInvalidArgument, "steps must be >= 1");
  require(learning_rate > 0.0, ErrorCode::kInvalidArgument, "learning_rate must be > 0");
  require(checkpoint_every >= 1, ErrorCode::kInvalidArgument, "checkpoint_every must be >= 1");
  require(batch >= 1 && k >= 1 && probe_instances >= 1, ErrorCode::kInvalidArgument,
          "batch, k and probe_instances must be >= 1");
}

SilencingReport silencing_demo(const JointTrainConfig& config,
                               const toy::ToyTransformer& initial) {
  config.validate();
  SilencingReport report;
  report.config = config;
  toy::ToyTransformer model(initial.config(), initial.params());
  toy::Adam adam(initial.config(), toy::Adam::Options{.learning_rate = config.learning_rate});
  const auto frozen = [](const std::string& name) { return name.rfind("patch_proj", 0) == 0; };
  const auto probes = probe_set(config);
  Rng rng(derive_seed(config.seed, "joint-train"));
  const double inv_batch = 1.0 / static_cast<double>(config.batch);

  report.checkpoints.push_back(score(model, initial, probes, config.k, config.lambda, 0));
  for (std::size_t step = 1; step <= config.steps; ++step) {
    toy::Params grads = toy::Params::zeros(initial.config());
    double loss = 0.0;
    for (std::size_t b = 0; b < config.batch; ++b) {
      const toy::ToyInstance inst = toy::toy_task_sample(train_seed(rng), config.task);
      const toy::JointTerms t =
          toy::joint_objective_grad(model, inst, config.k, config.lambda, grads, inv_batch);
      loss += inv_batch * (t.alignment + config.lambda * t.answer_nll);
    }
    if (!std::isfinite(loss)) {
      report.divergence = "non-finite joint loss at step " + std::to_string(step);
      spdlog::warn("silencing demo seed {}: {}", config.seed, *report.divergence);
      break;
    }
    adam.step(model.mutable_params(), grads, frozen);
    if (step % config.checkpoint_every == 0 || step == config.steps) {
      report.checkpoints.push_back(
          score(model, initial, probes, config.k, config.lambda, step));
      const auto& c = report.checkpoints.back();
      spdlog::debug("seed {} lambda {} step {}: align {:.5f} nll {:.4f} le {:.3f} donated {:.3f}",
                    config.seed, config.lambda, step, c.alignment_loss, c.answer_nll,
                    c.latent_end_logit, c.donated_latents_accuracy);
    }
  }
  return report;
}

SilencingReport silencing_demo(const JointTrainConfig& config) {
  const auto initial = toy::load_or_pretrain(toy::PretrainConfig{});
  return silencing_demo(config, *initial);
}

nlohmann::json to_json(const SilencingReport& report, const std::string& arm) {
  nlohmann::json cps = nlohmann::json::array();
  for (const auto& c : report.checkpoints) {
    cps.push_back({{"step", c.step},
                   {"alignment_loss", c.alignment_loss},
                   {"answer_nll", c.answer_nll},
                   {"latent_end_logit", c.latent_end_logit},
                   {"attention_share_latent", c.attention_share_latent},
                   {"attention_share_visual", c.attention_share_visual},
                   {"donated_latents_accuracy", c.donated_latents_accuracy},
                   {"joint_model_accuracy", c.joint_model_accuracy}});
  }
  return {{"arm", arm},
          {"seed", report.config.seed},
          {"lambda", report.config.lambda},
          {"steps", report.config.steps},
          {"learning_rate", report.config.learning_rate},
          {"checkpoint_every", report.config.checkpoint_every},
          {"divergence", report.divergence ? nlohmann::json(*report.divergence) : nullptr},
          {"checkpoints", std::move(cps)}};
}

void write_silencing_outputs(const std::vector<std::pair<std::string, SilencingReport>>& arms,
                             const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream jsonl(out_dir / "silencing_report.jsonl", std::ios::binary | std::ios::trunc);
  std::ofstream csv(out_dir / "silencing_report.csv", std::ios::binary | std::ios::trunc);
  require(jsonl && csv, ErrorCode::kIo, "cannot write silencing outputs in " + out_dir.string());
  csv.precision(17);
  csv << "arm,seed,lambda,step,alignment_loss,answer_nll,latent_end_logit,"
         "attention_share_latent,attention_share_visual,donated_latents_accuracy,"
         "joint_model_accuracy\n";
  for (const auto& [arm, report] : arms) {
    jsonl << to_json(report, arm).dump() << '\n';
    for (const auto& c : report.checkpoints) {
      csv << arm << ',' << report.config.seed << ',' << report.config.lambda << ',' << c.step
          << ',' << c.alignment_loss << ',' << c.answer_nll << ',' << c.latent_end_logit << ','
          << c.attention_share_latent << ',' << c.attention_share_visual << ','
          << c.donated_latents_accuracy << ',' << c.joint_model_accuracy << '\n';
    }
  }
  require(static_cast<bool>(jsonl) && static_cast<bool>(csv), ErrorCode::kIo,
          "write failed in " + out_dir.string());
}

}  // namespace latentforge::diagnostics
