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

// Persisted run artifacts: results.jsonl holds one InstanceResult per line,
// manifest.json holds the config snapshot and a per-instance index.
//
// wall_time_ms is recorded in the manifest index only, so results.jsonl is
// byte-identical across repeated serial runs.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "latentforge/pipeline/config.hpp"

namespace latentforge {

inline constexpr int kManifestFormatVersion = 1;

struct InstanceResult {
  std::string instance_id;
  std::uint64_t instance_seed = 0;
  WarmupTrace warmup_trace;
  RewardTrace reward_trace;
  std::vector<TokenId> answer_ids;
  bool gold_match = false;
  std::size_t output_token_count = 0;
  double wall_time_ms = 0.0;
  std::optional<std::string> error;

  friend bool operator==(const InstanceResult&, const InstanceResult&) = default;
};

struct ManifestEntry {
  std::string instance_id;
  bool gold_match = false;
  bool failed = false;
  double wall_time_ms = 0.0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct RunManifest {
  int format_version = kManifestFormatVersion;
  std::string library_version = kLibraryVersion;
  RunConfig config;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> instances;
  double aggregate_accuracy = 0.0;
  std::size_t failures = 0;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

// Index, accuracy and hash for a finished result list. Throws on an empty
// list or duplicate instance ids.
RunManifest build_manifest(const RunConfig& config, const std::vector<InstanceResult>& results);

nlohmann::json to_json(const InstanceResult& r);
InstanceResult instance_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

// One compact JSON line, without wall_time_ms.
std::string result_line(const InstanceResult& r);
// FNV-1a 64 of result_line, 16 hex digits.
std::string result_digest(const InstanceResult& r);

void write_results(const std::vector<InstanceResult>& results,
                   const std::filesystem::path& path);
std::vector<InstanceResult> read_results(const std::filesystem::path& path);

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

// Long-format trajectories: one row per optimizer step.
void write_trajectories(const std::vector<InstanceResult>& results,
                        const std::filesystem::path& path);

}  // namespace latentforge
