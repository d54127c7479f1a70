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

// Synthetic "what shape is the <color> object?" task. A grid holds several
// non-overlapping square objects, each with a distinct color and a shape;
// the query names one color and the answer is that object's shape token.
// Patch feature layout (d_in = n_colors + n_shapes + 4):
//   [colors one-hot][shapes one-hot][object flag][3 nuisance channels]
// plus isotropic Gaussian noise on every channel.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "latentforge/backend/types.hpp"

namespace latentforge::toy {

struct ToyTaskConfig {
  std::size_t grid_rows = 6;
  std::size_t grid_cols = 6;
  std::size_t n_colors = 6;
  std::size_t n_shapes = 6;
  std::size_t n_objects = 3;
  std::size_t object_side = 2;
  double feature_noise = 0.5;

  std::size_t d_in() const { return n_colors + n_shapes + 4; }
};

struct ToyInstance {
  std::uint64_t seed = 0;
  VisualSpec visual;
  QueryTokens query;
  std::vector<TokenId> gold_answer;
  // Patches covered by the queried object, ascending.
  std::vector<std::size_t> relevant_patches;
};

ToyInstance toy_task_sample(std::uint64_t seed, const ToyTaskConfig& cfg = {});

// Splits the relevant patches into k ordered groups, one per latent. When
// k exceeds the number of patches the groups cycle through them.
std::vector<std::vector<std::size_t>> clue_groups(
    const std::vector<std::size_t>& relevant, std::size_t k);

}  // namespace latentforge::toy
