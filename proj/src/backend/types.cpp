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

#include "latentforge/backend/types.hpp"

#include <algorithm>
#include <unordered_set>

namespace latentforge {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid argument";
    case ErrorCode::kDimensionMismatch:
      return "dimension mismatch";
    case ErrorCode::kPrecondition:
      return "precondition violated";
    case ErrorCode::kProtocol:
      return "protocol error";
    case ErrorCode::kParse:
      return "parse error";
    case ErrorCode::kVersionMismatch:
      return "version mismatch";
    case ErrorCode::kIo:
      return "io error";
  }
  return "error";
}

void VisualSpec::validate() const {
  require(patches.rows() >= 1, ErrorCode::kInvalidArgument,
          "visual input needs at least one patch");
  require(grid_rows * grid_cols == patches.rows(), ErrorCode::kDimensionMismatch,
          "grid shape does not match the patch count");
  require(patches.all_finite(), ErrorCode::kInvalidArgument,
          "patch features must be finite");
}

void BackendContext::validate() const {
  require(visual_index_set.size() == n_visual, ErrorCode::kInvalidArgument,
          "visual index set size differs from n_visual");
  std::unordered_set<std::size_t> seen(visual_index_set.begin(),
                                       visual_index_set.end());
  require(seen.size() == visual_index_set.size(), ErrorCode::kInvalidArgument,
          "duplicate visual positions");
  for (std::size_t q : query_index_set) {
    require(!seen.contains(q), ErrorCode::kInvalidArgument,
            "visual and query index sets overlap");
  }
  auto below = [&](std::size_t i) { return i < seq_len; };
  require(std::all_of(visual_index_set.begin(), visual_index_set.end(), below) &&
              std::all_of(query_index_set.begin(), query_index_set.end(), below),
          ErrorCode::kInvalidArgument, "index beyond the sequence length");
}

}  // namespace latentforge
