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

#include "latentforge/backend/toy_task.hpp"

#include <algorithm>
#include <numeric>

#include "latentforge/backend/toy_transformer.hpp"
#include "latentforge/rng.hpp"

namespace latentforge::toy {
namespace {

struct Placement {
  std::size_t row, col;
};

bool overlaps(const Placement& a, const Placement& b, std::size_t side) {
  const bool rows_apart = a.row + side <= b.row || b.row + side <= a.row;
  const bool cols_apart = a.col + side <= b.col || b.col + side <= a.col;
  return !(rows_apart || cols_apart);
}

}  // namespace

ToyInstance toy_task_sample(std::uint64_t seed, const ToyTaskConfig& cfg) {
  require(cfg.object_side >= 1 && cfg.object_side <= cfg.grid_rows &&
              cfg.object_side <= cfg.grid_cols,
          ErrorCode::kInvalidArgument, "object does not fit the grid");
  require(cfg.n_objects >= 1 && cfg.n_objects <= cfg.n_colors,
          ErrorCode::kInvalidArgument, "need a distinct color per object");
  Rng rng(mix64(seed ^ 0x746f792d7461736bULL));

  const std::size_t slots_r = cfg.grid_rows - cfg.object_side + 1;
  const std::size_t slots_c = cfg.grid_cols - cfg.object_side + 1;
  std::vector<Placement> placed;
  // Rejection sampling; restarts if the layout gets stuck.
  for (int attempt = 0; placed.size() < cfg.n_objects; ++attempt) {
    require(attempt < 10000, ErrorCode::kInvalidArgument,
            "cannot place the requested objects on this grid");
    if (attempt % 100 == 99) placed.clear();
    Placement p{rng.index(slots_r), rng.index(slots_c)};
    const bool clash = std::any_of(placed.begin(), placed.end(), [&](const auto& q) {
      return overlaps(p, q, cfg.object_side);
    });
    if (!clash) placed.push_back(p);
  }

  std::vector<std::size_t> colors(cfg.n_colors);
  std::iota(colors.begin(), colors.end(), 0);
  for (std::size_t i = 0; i + 1 < colors.size(); ++i) {
    std::swap(colors[i], colors[i + rng.index(colors.size() - i)]);
  }
  std::vector<std::size_t> shapes(cfg.n_objects);
  for (auto& s : shapes) s = rng.index(cfg.n_shapes);
  const std::size_t target = rng.index(cfg.n_objects);

  const std::size_t n = cfg.grid_rows * cfg.grid_cols;
  ToyInstance inst;
  inst.seed = seed;
  inst.visual.grid_rows = cfg.grid_rows;
  inst.visual.grid_cols = cfg.grid_cols;
  inst.visual.patches = Matrix(n, cfg.d_in());
  Matrix& f = inst.visual.patches;
  const std::size_t shape_off = cfg.n_colors;
  const std::size_t flag = cfg.n_colors + cfg.n_shapes;
  for (std::size_t o = 0; o < cfg.n_objects; ++o) {
    for (std::size_t dr = 0; dr < cfg.object_side; ++dr) {
      for (std::size_t dc = 0; dc < cfg.object_side; ++dc) {
        const std::size_t idx =
            (placed[o].row + dr) * cfg.grid_cols + placed[o].col + dc;
        f(idx, colors[o]) = 1.0;
        f(idx, shape_off + shapes[o]) = 1.0;
        f(idx, flag) = 1.0;
        if (o == target) inst.relevant_patches.push_back(idx);
      }
    }
  }
  for (double& v : f.flat()) v += cfg.feature_noise * rng.normal();
  std::sort(inst.relevant_patches.begin(), inst.relevant_patches.end());

  inst.query.ids = {Vocab::kAskShape,
                    static_cast<TokenId>(Vocab::kColorBase + colors[target]),
                    Vocab::kQuestionMark};
  inst.gold_answer = {static_cast<TokenId>(Vocab::kShapeBase + shapes[target])};
  return inst;
}

std::vector<std::vector<std::size_t>> clue_groups(
    const std::vector<std::size_t>& relevant, std::size_t k) {
  require(!relevant.empty() && k >= 1, ErrorCode::kInvalidArgument,
          "clue groups need patches and k >= 1");
  std::vector<std::vector<std::size_t>> groups(k);
  if (k >= relevant.size()) {
    for (std::size_t i = 0; i < k; ++i) groups[i] = {relevant[i % relevant.size()]};
    return groups;
  }
  // Contiguous, sizes differ by at most one.
  for (std::size_t i = 0; i < relevant.size(); ++i) {
    groups[i * k / relevant.size()].push_back(relevant[i]);
  }
  return groups;
}

}  // namespace latentforge::toy
