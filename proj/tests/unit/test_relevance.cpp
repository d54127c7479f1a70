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
#include <numeric>
#include <set>

#include "doctest.h"
#include "latentforge/error.hpp"
#include "latentforge/relevance.hpp"
#include "latentforge/rng.hpp"

using namespace latentforge;

namespace {

Matrix random_attention(Rng& rng, std::size_t q, std::size_t n) {
  Matrix m(q, n);
  for (double& v : m.flat()) v = rng.uniform() / static_cast<double>(n);
  return m;
}

}  // namespace

TEST_CASE("scores are column means of the query block") {
  const Matrix a = Matrix::from_rows({{0.5, 0.1}, {0.3, 0.2}});
  const auto s = relevance_scores(a);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(rank_descending(s) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("single query row and zero block") {
  const Matrix one = Matrix::from_rows({{0.2, 0.7, 0.1}});
  CHECK(relevance_scores(one) == std::vector<double>{0.2, 0.7, 0.1});
  const Matrix zero(3, 4);
  CHECK(relevance_scores(zero) == std::vector<double>(4, 0.0));
}

TEST_CASE("invalid attention blocks are rejected") {
  CHECK_THROWS_AS(relevance_scores(Matrix(0, 4)), Error);
  CHECK_THROWS_AS(relevance_scores(Matrix::from_rows({{0.1, -0.2}})), Error);
}

TEST_CASE("ranking ties keep index order") {
  CHECK(rank_descending(std::vector<double>{0.9, 0.5, 0.1}) ==
        std::vector<std::size_t>{0, 1, 2});
  CHECK(rank_descending(std::vector<double>(5, 0.3)) ==
        std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(rank_descending(std::vector<double>{0.1, 0.4, 0.1, 0.4}) ==
        std::vector<std::size_t>{1, 3, 0, 2});
}

TEST_CASE("chunk layout for N=16, K=2") {
  std::vector<std::size_t> perm(16);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());  // any permutation; use a non-identity one
  const auto a = assign_chunks(perm, 2, 2, 4);
  CHECK(a.positives[0] == std::vector<std::size_t>{perm[0], perm[1]});
  CHECK(a.positives[1] == std::vector<std::size_t>{perm[2], perm[3]});
  CHECK(a.negatives[0] == std::vector<std::size_t>{perm[12], perm[13], perm[14], perm[15]});
  CHECK(a.negatives[1] == std::vector<std::size_t>{perm[8], perm[9], perm[10], perm[11]});
}

TEST_CASE("exact fit assigns every token once and too few tokens fail") {
  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  const auto a = assign_chunks(perm, 2, 2, 4);
  std::multiset<std::size_t> seen;
  for (std::size_t k = 0; k < 2; ++k) {
    seen.insert(a.positives[k].begin(), a.positives[k].end());
    seen.insert(a.negatives[k].begin(), a.negatives[k].end());
  }
  CHECK(seen == std::multiset<std::size_t>(perm.begin(), perm.end()));
  std::vector<std::size_t> five(5);
  std::iota(five.begin(), five.end(), 0);
  CHECK_THROWS_AS(assign_chunks(five, 2, 2, 4), Error);
}

TEST_CASE("property: score mean, row-permutation invariance, sorted ranking") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t q = 1 + rng.index(6);
    const std::size_t n = 1 + rng.index(40);
    const Matrix a = random_attention(rng, q, n);
    const auto s = relevance_scores(a);
    double mean_s = 0.0, mean_a = 0.0;
    for (double v : s) mean_s += v;
    for (double v : a.flat()) mean_a += v;
    CHECK(mean_s / n == doctest::Approx(mean_a / (q * n)).epsilon(1e-12));

    auto rows = a.to_rows();
    std::reverse(rows.begin(), rows.end());
    const auto s2 = relevance_scores(Matrix::from_rows(rows));
    for (std::size_t i = 0; i < n; ++i) CHECK(s2[i] == doctest::Approx(s[i]).epsilon(1e-14));

    const auto perm = rank_descending(s);
    for (std::size_t t = 1; t < n; ++t) CHECK(s[perm[t - 1]] >= s[perm[t]]);
    auto sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == i);
  }
}

TEST_CASE("property: chunks are disjoint, exact and rank-separated") {
  Rng rng(202);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng.index(5);
    const std::size_t pos = 1 + rng.index(4);
    const std::size_t neg = rng.index(5);
    const std::size_t n = k * (pos + neg) + rng.index(10);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 0; i + 1 < n; ++i) std::swap(perm[i], perm[i + rng.index(n - i)]);
    std::vector<std::size_t> rank_of(n);
    for (std::size_t t = 0; t < n; ++t) rank_of[perm[t]] = t;

    const auto a = assign_chunks(perm, k, pos, neg);
    std::set<std::size_t> seen;
    std::size_t total = 0, worst_pos = 0, best_neg = n;
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(a.positives[i].size() == pos);
      CHECK(a.negatives[i].size() == neg);
      for (auto t : a.positives[i]) worst_pos = std::max(worst_pos, rank_of[t]);
      for (auto t : a.negatives[i]) best_neg = std::min(best_neg, rank_of[t]);
      seen.insert(a.positives[i].begin(), a.positives[i].end());
      seen.insert(a.negatives[i].begin(), a.negatives[i].end());
      total += pos + neg;
    }
    CHECK(seen.size() == total);
    CHECK(*seen.rbegin() < n);
    if (neg > 0) CHECK(worst_pos < best_neg);
  }
}
