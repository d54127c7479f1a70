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

// Query-guided relevance over visual tokens and the per-latent partition of
// the ranking into positive and negative chunks. Indices are 0-based visual
// token indices; ranks are 0-based positions in the permutation.

#include <cstddef>
#include <span>
#include <vector>

#include "latentforge/tensor.hpp"

namespace latentforge {

struct RelevanceRanking {
  std::vector<double> scores;           // s_n
  std::vector<std::size_t> permutation;  // permutation[t] = token at rank t
};

struct ChunkAssignment {
  std::vector<std::vector<std::size_t>> positives;  // K sets of pos_num
  std::vector<std::vector<std::size_t>> negatives;  // K sets of neg_num
  std::size_t pos_num = 0;
  std::size_t neg_num = 0;

  std::size_t k() const { return positives.size(); }
  friend bool operator==(const ChunkAssignment&, const ChunkAssignment&) = default;
};

// Column means of the |I_Q| x N query-to-visual attention block.
std::vector<double> relevance_scores(const Matrix& qv_attention);

// Stable descending order; equal scores keep ascending index order.
std::vector<std::size_t> rank_descending(std::span<const double> scores);

RelevanceRanking rank_visual_tokens(const Matrix& qv_attention);

// Latent k takes ranks [k*pos_num, (k+1)*pos_num) as positives and ranks
// [N-(k+1)*neg_num, N-k*neg_num) as negatives, so latent 0 is pushed away
// from the least relevant chunk. Requires N >= K * (pos_num + neg_num).
ChunkAssignment assign_chunks(std::span<const std::size_t> permutation,
                              std::size_t k, std::size_t pos_num,
                              std::size_t neg_num);

}  // namespace latentforge
