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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "latentforge/backend/toy_task.hpp"
#include "latentforge/backend/toy_trainer.hpp"
#include "latentforge/backend/toy_transformer.hpp"
#include "latentforge/rng.hpp"

using namespace latentforge;
using namespace latentforge::toy;

namespace {

// Scalar objective: sum of w_h * hidden + w_l * logits with fixed random
// weights, so every output entry contributes.
struct Probe {
  Matrix w_hidden, w_logits;
  double value(const ForwardResult& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < f.hidden.size(); ++i) {
      s += w_hidden.flat()[i] * f.hidden.flat()[i];
    }
    for (std::size_t i = 0; i < f.logits.size(); ++i) {
      s += w_logits.flat()[i] * f.logits.flat()[i];
    }
    return s;
  }
};

struct Fixture {
  ModelConfig cfg;
  ToyInstance inst = toy_task_sample(3);
  Matrix latents;
  Sequence seq;
  Probe probe;

  Fixture() {
    Rng rng(5);
    latents = Matrix(3, cfg.d_model);
    for (double& v : latents.flat()) v = rng.normal();
    seq.patches = &inst.visual.patches;
    seq.query = &inst.query.ids;
    seq.latents = latents;
    seq.has_latent_end = true;
    seq.text = {Vocab::kShapeBase + 1};
    const std::size_t m = seq.length();
    probe.w_hidden = Matrix(m, cfg.d_model);
    probe.w_logits = Matrix(m, cfg.vocab_size);
    for (double& v : probe.w_hidden.flat()) v = rng.normal();
    for (double& v : probe.w_logits.flat()) v = rng.normal();
  }
};

}  // namespace

TEST_CASE("attention rows are causal softmax rows") {
  Fixture fx;
  ToyTransformer model(fx.cfg, Params::random(fx.cfg, 0));
  ForwardResult f = model.forward(fx.seq);
  for (std::size_t i = 0; i < f.length; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < f.length; ++j) {
      if (j > i) CHECK(f.attention(i, j) == 0.0);
      CHECK(f.attention(i, j) >= 0.0);
      total += f.attention(i, j);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("causal prefix outputs do not depend on later inputs") {
  Fixture fx;
  ToyTransformer model(fx.cfg, Params::random(fx.cfg, 0));
  ForwardResult full = model.forward(fx.seq);
  Sequence shorter = fx.seq;
  shorter.has_latent_end = false;
  shorter.text.clear();
  ForwardResult prefix = model.forward(shorter);
  for (std::size_t p = 0; p < prefix.length; ++p) {
    for (std::size_t c = 0; c < fx.cfg.d_model; ++c) {
      CHECK(prefix.hidden(p, c) == doctest::Approx(full.hidden(p, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward agrees with central finite differences") {
  Fixture fx;
  ToyTransformer model(fx.cfg, Params::random(fx.cfg, 1));
  Params grads = Params::zeros(fx.cfg);
  ForwardResult f = model.forward(fx.seq);
  Matrix d_emb = model.backward(f, fx.probe.w_hidden, &fx.probe.w_logits, grads);
  Matrix d_latents = model.backward_embed(fx.seq, d_emb, grads);

  const double h = 1e-5;
  Rng pick(9);
  // Parameters: a few random entries from every tensor.
  std::vector<std::string> names;
  model.params().for_each([&](const std::string& n, const Matrix&) { names.push_back(n); });
  for (const auto& name : names) {
    for (int trial = 0; trial < 3; ++trial) {
      Params p = model.params();
      Matrix* target = nullptr;
      p.for_each([&](const std::string& n, Matrix& m) {
        if (n == name) target = &m;
      });
      const std::size_t idx = pick.index(target->size());
      const double base = target->flat()[idx];
      target->flat()[idx] = base + h;
      const double up = fx.probe.value(ToyTransformer(fx.cfg, p).forward(fx.seq));
      target->flat()[idx] = base - h;
      const double down = fx.probe.value(ToyTransformer(fx.cfg, p).forward(fx.seq));
      const double numeric = (up - down) / (2 * h);
      double analytic = 0.0;
      grads.for_each([&](const std::string& n, const Matrix& m) {
        if (n == name) analytic = m.flat()[idx];
      });
      CAPTURE(name);
      CAPTURE(idx);
      CHECK(analytic == doctest::Approx(numeric).epsilon(1e-5).scale(1.0));
    }
  }
  // Latent input rows.
  for (std::size_t i = 0; i < fx.latents.size(); i += 7) {
    Sequence s = fx.seq;
    s.latents.flat()[i] += h;
    const double up = fx.probe.value(model.forward(s));
    s.latents.flat()[i] -= 2 * h;
    const double down = fx.probe.value(model.forward(s));
    CHECK(d_latents.flat()[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("patch width mismatch is rejected") {
  ModelConfig cfg;
  ToyTransformer model(cfg, Params::random(cfg, 0));
  Matrix bad(4, cfg.d_in + 1);
  CHECK_THROWS_AS(model.project_patches(bad), Error);
}

TEST_CASE("joint objective gradient includes the rollout feedback path") {
  ModelConfig cfg;
  ToyTransformer model(cfg, Params::random(cfg, 4));
  const ToyInstance inst = toy_task_sample(12);
  const std::size_t k = 3;
  const double lambda = 0.7;
  Params grads = Params::zeros(cfg);
  joint_objective_grad(model, inst, k, lambda, grads);

  auto objective = [&](const Params& p) {
    ToyTransformer m(cfg, p);
    Params scratch = Params::zeros(cfg);
    JointTerms t = joint_objective_grad(m, inst, k, lambda, scratch);
    return t.alignment + lambda * t.answer_nll;
  };
  const double h = 1e-5;
  Rng pick(21);
  for (const char* name : {"layer0.wq", "layer1.w1", "lnf_gain", "token_embedding",
                           "position_embedding", "layer0.wv", "out_w"}) {
    for (int trial = 0; trial < 4; ++trial) {
      Params p = model.params();
      Matrix* target = nullptr;
      p.for_each([&](const std::string& n, Matrix& m) {
        if (n == name) target = &m;
      });
      std::size_t idx = pick.index(target->size());
      if (std::string(name) == "token_embedding") {
        idx = Vocab::kLatentStart * cfg.d_model + pick.index(cfg.d_model);
      }
      const double base = target->flat()[idx];
      target->flat()[idx] = base + h;
      const double up = objective(p);
      target->flat()[idx] = base - h;
      const double down = objective(p);
      double analytic = 0.0;
      grads.for_each([&](const std::string& n, const Matrix& m) {
        if (n == name) analytic = m.flat()[idx];
      });
      CAPTURE(name);
      CHECK(analytic == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1.0));
    }
  }
  double proj_grad = 0.0;
  for (double v : grads.patch_proj_w.flat()) proj_grad += std::abs(v);
  CHECK(proj_grad == 0.0);
}
