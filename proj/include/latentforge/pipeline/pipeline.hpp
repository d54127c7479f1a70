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
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "latentforge/backend/backend.hpp"
#include "latentforge/backend/toy_task.hpp"
#include "latentforge/pipeline/config.hpp"
#include "latentforge/pipeline/results.hpp"

namespace latentforge {

struct DatasetInstance {
  std::string id;
  VisualSpec visual;
  QueryTokens query;
  std::vector<TokenId> gold_answer;
};

// encode -> initial latents -> warm-up -> reinforcement -> decode with the
// retained state. The instance seed drives the Stage II noise.
InstanceResult optimize_instance(Backend& backend, const DatasetInstance& instance,
                                 const RunConfig& config, std::uint64_t instance_seed);

// Same, with the instance seed derived from (config.seed, instance.id).
InstanceResult optimize_instance(Backend& backend, const DatasetInstance& instance,
                                 const RunConfig& config);

struct DatasetOptions {
  std::size_t workers = 1;
  // When set, manifest.json and results.jsonl (plus trajectories.csv if
  // requested) are written here.
  std::optional<std::filesystem::path> out_dir;
  bool write_trajectories = false;
  // Called from the writer with each result in dataset order.
  std::function<void(const InstanceResult&)> on_result;
};

struct DatasetRun {
  RunManifest manifest;
  std::vector<InstanceResult> results;  // dataset order
};

// Instance failures are recorded, not thrown. Results are emitted in
// dataset order regardless of the worker count.
DatasetRun evaluate_dataset(Backend& backend, const std::vector<DatasetInstance>& instances,
                            const RunConfig& config, const DatasetOptions& options = {});

// Toy instances "toy-000000".. whose task seeds derive from (seed, id).
std::vector<DatasetInstance> toy_dataset(std::size_t n, std::uint64_t seed,
                                         const toy::ToyTaskConfig& task = {});

DatasetInstance to_dataset_instance(const toy::ToyInstance& inst, std::string id);

// Toy backend (default pretrained checkpoint) or remote client.
std::unique_ptr<Backend> make_backend(const RunConfig& config);

}  // namespace latentforge
