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

#include "doctest.h"
#include "latentforge/backend/toy_backend.hpp"
#include "latentforge/backend/toy_task.hpp"
#include "latentforge/error.hpp"
#include "latentforge/reinforce.hpp"
#include "latentforge/rng.hpp"
#include "scripted_backend.hpp"

using namespace latentforge;
using latentforge::testing::logits_with_reward;
using latentforge::testing::ScriptedBackend;

namespace {

Matrix random_logits(Rng& rng, std::size_t k, std::size_t v, double scale) {
  Matrix m(k, v);
  for (double& x : m.flat()) x = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("top-delta entropy examples") {
  std::vector<double> one_hot(10, 0.0);
  one_hot[3] = 1.0;
  CHECK(topk_entropy(one_hot, 1) == 0.0);
  CHECK(topk_entropy(one_hot, 7) == 0.0);
  std::vector<double> two(6, 0.0);
  two[1] = two[4] = 0.5;
  CHECK(topk_entropy(two, 2) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(topk_entropy(two, 5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> p{0.1, 0.5, 0.1, 0.3};
  const double expected = -0.5 * std::log(0.5) - 0.3 * std::log(0.3);
  CHECK(topk_entropy(p, 2) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(topk_entropy(p, 2) == doctest::Approx(0.7078).epsilon(1e-4));
}

TEST_CASE("invalid distributions are rejected") {
  CHECK_THROWS_AS(topk_entropy(std::vector<double>{0.5, 0.4}, 2), Error);
  CHECK_THROWS_AS(topk_entropy(std::vector<double>{1.2, -0.2}, 2), Error);
  CHECK_THROWS_AS(topk_entropy(std::vector<double>{1.0}, 0), Error);
}

TEST_CASE("reward from injected entropy profiles") {
  CHECK(progression_reward_from_entropies(std::vector<double>{0.6, 0.4, 0.5}) ==
        doctest::Approx(0.1).epsilon(1e-15));
  CHECK(progression_reward_from_entropies(std::vector<double>{0.1, 0.2, 0.2, 0.9}) == 0.0);
  CHECK(progression_reward_from_entropies(std::vector<double>{0.9, 0.2}) ==
        doctest::Approx(0.7).epsilon(1e-15));
  CHECK(progression_reward_from_entropies(std::vector<double>{1.3}) == 0.0);
}

TEST_CASE("property: reward bounds, telescoping and shift invariance") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 1 + rng.index(5);
    const std::size_t vocab = 3 + rng.index(60);
    const std::size_t delta = 3 + rng.index(15);
    const Matrix logits = random_logits(rng, k, vocab, 0.5 + 3.0 * rng.uniform());
    const double r = progression_reward(logits, delta);
    CHECK(r >= 0.0);
    CHECK(r <= std::log(static_cast<double>(delta)) + 1e-12);

    Matrix shifted = logits;
    for (std::size_t i = 0; i < k; ++i) {
      const double c = 10.0 * rng.normal();
      for (double& x : shifted.row(i)) x += c;
    }
    CHECK(std::abs(progression_reward(shifted, delta) - r) <= 1e-10);

    auto e = entropy_profile(logits, delta);
    std::sort(e.begin(), e.end(), std::greater<double>());
    const double tele = k == 1 ? 0.0 : (e.front() - e.back()) / static_cast<double>(k - 1);
    CHECK(std::abs(progression_reward_from_entropies(e) - tele) <= 1e-10);
  }
}

TEST_CASE("top-delta entropy can exceed ln(delta) for delta below 3") {
  // Unnormalized top-1 mass p contributes -p ln p, which peaks at 1/e > ln 1.
  std::vector<double> p(3, (1.0 - std::exp(-1.0)) / 2.0);
  p[0] = std::exp(-1.0);
  CHECK(topk_entropy(p, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(topk_entropy(p, 1) > std::log(1.0));
}

TEST_CASE("sigma schedule and NES step") {
  ReinforceConfig cfg;
  cfg.sigma0 = 0.1;
  cfg.gamma = 0.9;
  CHECK(sigma_at(2, cfg) == doctest::Approx(0.081).epsilon(1e-15));
  CHECK(sigma_at(0, cfg) == 0.1);
  cfg.gamma = 1.0;
  CHECK(sigma_at(9, cfg) == 0.1);

  const LatentState h{Matrix(1, 1)};
  const Matrix eps = Matrix::from_rows({{0.1}});
  CHECK(nes_step(h, eps, 0.5, 0.02, 0.4).vectors(0, 0) ==
        doctest::Approx(0.0032).epsilon(1e-15));

  Rng rng(4);
  LatentState base{random_logits(rng, 3, 5, 1.0)};
  const Matrix noise = random_logits(rng, 3, 5, 0.2);
  CHECK(nes_step(base, noise, 0.3, 0.02, 0.0).vectors == base.vectors);
  const auto one = nes_step(base, noise, 0.3, 0.02, 0.25);
  const auto two = nes_step(base, noise, 0.3, 0.02, 0.5);
  for (std::size_t i = 0; i < base.vectors.size(); ++i) {
    const double d1 = one.vectors.flat()[i] - base.vectors.flat()[i];
    const double d2 = two.vectors.flat()[i] - base.vectors.flat()[i];
    CHECK(d2 == doctest::Approx(2 * d1).epsilon(1e-12));
  }
  CHECK_THROWS_AS(nes_step(base, Matrix(2, 5), 0.3, 0.02, 0.1), Error);
  CHECK_THROWS_AS(nes_step(base, noise, 0.0, 0.02, 0.1), Error);
}

TEST_CASE("zero steps returns the input with an empty trace") {
  ScriptedBackend be(8, 3, 12, [](std::size_t, const LatentState& h) {
    return Matrix(h.k(), 12);
  });
  const auto ctx = be.context();
  const auto h = be.initial_latents(ctx, 2);
  ReinforceConfig cfg;
  cfg.n_rl = 0;
  const auto r = reinforce_run(be, ctx, h, cfg, 1);
  CHECK(r.best == h);
  CHECK(r.trace.reward_per_step.empty());
  CHECK(r.trace.entropy_profiles.empty());
}

TEST_CASE("uniform logits give zero reward and leave the state untouched") {
  ScriptedBackend be(8, 3, 12, [](std::size_t, const LatentState& h) {
    return Matrix(h.k(), 12);
  });
  const auto ctx = be.context();
  const auto h = be.initial_latents(ctx, 4);
  const auto r = reinforce_run(be, ctx, h, ReinforceConfig{}, 5);
  CHECK(r.best == h);
  REQUIRE(r.trace.reward_per_step.size() == 15);
  for (double x : r.trace.reward_per_step) CHECK(x == 0.0);
}

TEST_CASE("retention keeps the post-update state of the best candidate") {
  // Call 0 scores H_sft, calls 1..3 score the candidates.
  const std::vector<double> rewards{0.0, 0.1, 0.5, 0.3};
  ScriptedBackend be(8, 3, 12, [&](std::size_t call, const LatentState&) {
    return logits_with_reward(rewards[call], 12);
  });
  const auto ctx = be.context();
  const auto h_sft = be.initial_latents(ctx, 2);
  ReinforceConfig cfg;
  cfg.n_rl = 3;
  const auto r = reinforce_run(be, ctx, h_sft, cfg, 77);
  REQUIRE(be.seen.size() == 4);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.trace.reward_per_step[i] == doctest::Approx(rewards[i + 1]).epsilon(1e-9));
  }

  // Hand simulation: eps_i = candidate_i - H_i, H_{i+1} = H_i + a/s_i^2 R_i eps_i.
  double sq = 0.0;
  for (double x : h_sft.vectors.flat()) sq += x * x;
  const double sigma0 = cfg.sigma0 * std::sqrt(sq / static_cast<double>(h_sft.vectors.size()));
  CHECK(r.trace.sigma0_effective == doctest::Approx(sigma0).epsilon(1e-14));
  Matrix h = h_sft.vectors;
  std::vector<Matrix> states;
  for (std::size_t i = 0; i < 3; ++i) {
    const double s = sigma0 * std::pow(cfg.gamma, static_cast<double>(i));
    const double reward = r.trace.reward_per_step[i];
    Matrix next = h;
    for (std::size_t j = 0; j < h.size(); ++j) {
      const double eps = be.seen[i + 1].vectors.flat()[j] - h.flat()[j];
      next.flat()[j] = h.flat()[j] + cfg.alpha / (s * s) * reward * eps;
    }
    states.push_back(next);
    h = next;
  }
  for (std::size_t j = 0; j < h.size(); ++j) {
    CHECK(r.best.vectors.flat()[j] == doctest::Approx(states[1].flat()[j]).epsilon(1e-12));
  }
  CHECK(r.trace.best_reward_per_step == std::vector<double>{
                                            r.trace.reward_per_step[0],
                                            r.trace.reward_per_step[1],
                                            r.trace.reward_per_step[1]});
}

TEST_CASE("toy backend run: monotone best trace and seeded determinism") {
  auto backend = toy::ToyBackend::untrained(2);
  toy::ToyTaskConfig task;
  const auto inst = toy::toy_task_sample(9, task);
  const auto ctx = backend->encode(inst.visual, inst.query);
  const auto h = backend->initial_latents(ctx, 4);
  const ReinforceConfig cfg;
  const auto a = reinforce_run(*backend, ctx, h, cfg, 1234);
  const auto b = reinforce_run(*backend, ctx, h, cfg, 1234);
  CHECK(a.best == b.best);
  CHECK(a.trace == b.trace);
  REQUIRE(a.trace.best_reward_per_step.size() == 15);
  double prev = a.trace.initial_reward;
  for (double x : a.trace.best_reward_per_step) {
    CHECK(x >= prev);
    prev = x;
  }
  for (double x : a.trace.reward_per_step) {
    CHECK(x >= 0.0);
    CHECK(x <= std::log(10.0));
  }
  const auto c = reinforce_run(*backend, ctx, h, cfg, 1235);
  CHECK(c.trace.entropy_profiles != a.trace.entropy_profiles);
}
