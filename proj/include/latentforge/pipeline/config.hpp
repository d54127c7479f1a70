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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "latentforge/reinforce.hpp"
#include "latentforge/warmup.hpp"

namespace latentforge {

inline constexpr const char* kLibraryVersion = "0.1.0";

enum class BackendKind { kToy, kRemote };

const char* backend_kind_name(BackendKind kind);
BackendKind parse_backend_kind(const std::string& name);

struct RunConfig {
  std::size_t K = 4;
  WarmupConfig warmup;
  ReinforceConfig reinforce;
  BackendKind backend_kind = BackendKind::kToy;
  std::optional<std::string> backend_endpoint;
  std::size_t max_decode_len = 8;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// JSON uses the field names above verbatim. Missing fields keep their
// defaults; unknown fields and wrong types are errors.
nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);

// Compact, key-sorted JSON of every field.
std::string canonical_config(const RunConfig& config);
// FNV-1a 64 of canonical_config, as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace latentforge
