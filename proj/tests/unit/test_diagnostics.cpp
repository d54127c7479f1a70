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

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "latentforge/backend/toy_backend.hpp"
#include "latentforge/backend/toy_trainer.hpp"
#include "latentforge/diagnostics.hpp"

using namespace latentforge;
using namespace latentforge::diagnostics;

TEST_CASE("joint loss examples") {
  const Matrix h = Matrix::from_rows({{1.0, 0.0}});
  const Matrix v = Matrix::from_rows({{0.0, 0.0}});
  CHECK(joint_loss(h, v, 2.0, 0.5) == 2.0);
  CHECK(joint_loss(h, h, 0.0, 3.0) == 0.0);
  const Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, -1.0}});
  const Matrix b = Matrix::from_rows({{0.0, 2.0}, {1.0, 1.0}});
  CHECK(joint_loss(a, b, 5.0, 0.0) == doctest::Approx((1.0 + 8.0) / 2.0).epsilon(1e-15));
  CHECK_THROWS_AS(joint_loss(a, h, 0.0, 1.0), Error);
  CHECK_THROWS_AS(joint_loss(a, b, -1.0, 1.0), Error);
}

TEST_CASE("property: joint loss sign, zero set and pair permutation") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 4.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + gen() % 5, d = 1 + gen() % 6;
    Matrix h(k, d), v(k, d);
    for (auto& x : h.flat()) x = nd(gen);
    for (auto& x : v.flat()) x = nd(gen);
    const double nll = ud(gen), lambda = ud(gen);
    CHECK(joint_loss(h, v, nll, lambda) >= 0.0);
    CHECK(joint_loss(h, v, nll, lambda) > 0.0);
    CHECK(joint_loss(v, v, 0.0, lambda) == 0.0);

    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    Matrix hp(k, d), vp(k, d);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        hp(i, c) = h(perm[i], c);
        vp(i, c) = v(perm[i], c);
      }
    }
    CHECK(joint_loss(hp, vp, 0.0, 0.0) ==
          doctest::Approx(joint_loss(h, v, 0.0, 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("efficiency ratio examples and sign") {
  CHECK(efficiency_ratio(2.25, 30.0) == 0.75);
  CHECK(efficiency_ratio(1.5, 30.0) == 0.5);
  CHECK(efficiency_ratio(0.0, 17.0) == 0.0);
  CHECK(efficiency_ratio(-3.0, 12.0) < 0.0);
  CHECK(efficiency_ratio(3.0, 12.0) > 0.0);
  CHECK_THROWS_AS(efficiency_ratio(1.0, 0.0), Error);
}

TEST_CASE("attention share passthrough") {
  DecodeOutput d;
  const AttentionShare zero = attention_share(d);
  CHECK(zero.latent == 0.0);
  CHECK(zero.visual == 0.0);
  d.attention_share_latent = 0.25;
  d.attention_share_visual = 0.5;
  CHECK(attention_share(d).latent == 0.25);
  d.attention_share_visual = 0.9;
  CHECK_THROWS_AS(attention_share(d), Error);

  auto backend = toy::ToyBackend::untrained(2);
  const auto inst = toy::toy_task_sample(5);
  const auto ctx = backend->encode(inst.visual, inst.query);
  const auto out = backend->decode_answer(ctx, backend->initial_latents(ctx, 4), 4);
  const AttentionShare s = attention_share(out);
  CHECK(s.latent >= 0.0);
  CHECK(s.visual >= 0.0);
  CHECK(s.latent + s.visual <= 1.0 + 1e-6);
  backend->close(ctx);
}

TEST_CASE("spearman correlation") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3}, {5, 5, 5}) == 0.0);
  // Average ranks: y ranks (1, 2.5, 2.5, 4).
  CHECK(spearman({1, 2, 3, 4}, {1, 2, 2, 3}) == doctest::Approx(0.9486832980505138));
}

TEST_CASE("silencing report shape on a short run") {
  auto model = toy::ToyBackend::untrained(6);
  JointTrainConfig cfg;
  cfg.steps = 5;
  cfg.checkpoint_every = 2;
  cfg.batch = 2;
  cfg.probe_instances = 4;
  const SilencingReport r = silencing_demo(cfg, model->model());
  CHECK_FALSE(r.divergence.has_value());
  REQUIRE(r.checkpoints.size() == 4);
  CHECK(r.checkpoints[0].step == 0);
  CHECK(r.checkpoints[1].step == 2);
  CHECK(r.checkpoints[3].step == 5);
  for (const auto& c : r.checkpoints) {
    CHECK(c.alignment_loss >= 0.0);
    CHECK(c.answer_nll >= 0.0);
    CHECK(c.attention_share_latent >= 0.0);
    CHECK(c.attention_share_latent + c.attention_share_visual <= 1.0 + 1e-6);
    CHECK(c.donated_latents_accuracy >= 0.0);
    CHECK(c.donated_latents_accuracy <= 1.0);
    CHECK(c.joint_model_accuracy <= 1.0);
  }
  CHECK(r.checkpoints[0].donated_latents_accuracy == r.checkpoints[0].joint_model_accuracy);

  const SilencingReport again = silencing_demo(cfg, model->model());
  CHECK(to_json(again, "x") == to_json(r, "x"));

  cfg.lambda = 0.0;
  const SilencingReport align_only = silencing_demo(cfg, model->model());
  CHECK(align_only.checkpoints.back().alignment_loss <
        align_only.checkpoints.front().alignment_loss);

  const auto dir = std::filesystem::temp_directory_path() / "lf-test-silencing";
  write_silencing_outputs({{"lambda", r}, {"half", align_only}}, dir);
  CHECK(std::filesystem::exists(dir / "silencing_report.jsonl"));
  CHECK(std::filesystem::exists(dir / "silencing_report.csv"));
  std::filesystem::remove_all(dir);
  JointTrainConfig bad;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
