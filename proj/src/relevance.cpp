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

#include "latentforge/relevance.hpp"

#include <algorithm>
#include <numeric>

#include "latentforge/error.hpp"

namespace latentforge {

std::vector<double> relevance_scores(const Matrix& qv_attention) {
  require(qv_attention.rows() >= 1, ErrorCode::kInvalidArgument, "empty query set");
  require(qv_attention.cols() >= 1, ErrorCode::kInvalidArgument, "no visual tokens");
  std::vector<double> scores(qv_attention.cols(), 0.0);
  for (std::size_t q = 0; q < qv_attention.rows(); ++q) {
    auto row = qv_attention.row(q);
    for (std::size_t n = 0; n < row.size(); ++n) {
      require(row[n] >= 0.0, ErrorCode::kInvalidArgument,
              "attention entries must be non-negative");
      scores[n] += row[n];
    }
  }
  const double inv = 1.0 / static_cast<double>(qv_attention.rows());
  for (double& s : scores) s *= inv;
  return scores;
}

std::vector<std::size_t> rank_descending(std::span<const double> scores) {
  require(!scores.empty(), ErrorCode::kInvalidArgument, "nothing to rank");
  std::vector<std::size_t> perm(scores.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return perm;
}

RelevanceRanking rank_visual_tokens(const Matrix& qv_attention) {
  RelevanceRanking r;
  r.scores = relevance_scores(qv_attention);
  r.permutation = rank_descending(r.scores);
  return r;
}

ChunkAssignment assign_chunks(std::span<const std::size_t> permutation,
                              std::size_t k, std::size_t pos_num,
                              std::size_t neg_num) {
  const std::size_t n = permutation.size();
  require(k >= 1, ErrorCode::kInvalidArgument, "K must be >= 1");
  require(pos_num >= 1, ErrorCode::kInvalidArgument, "pos_num must be >= 1");
  require(n >= k * (pos_num + neg_num), ErrorCode::kPrecondition,
          "too few visual tokens for the requested chunking");
  ChunkAssignment out;
  out.pos_num = pos_num;
  out.neg_num = neg_num;
  out.positives.resize(k);
  out.negatives.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto pos = permutation.subspan(i * pos_num, pos_num);
    out.positives[i].assign(pos.begin(), pos.end());
    const auto neg = permutation.subspan(n - (i + 1) * neg_num, neg_num);
    out.negatives[i].assign(neg.begin(), neg.end());
  }
  return out;
}

}  // namespace latentforge
