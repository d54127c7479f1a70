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

#include "latentforge/pipeline/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "latentforge/backend/remote_backend.hpp"
#include "latentforge/backend/toy_trainer.hpp"
#include "latentforge/rng.hpp"

namespace latentforge {
namespace {

// Closes the context on every exit path.
class ContextGuard {
 public:
  ContextGuard(Backend& backend, BackendContext ctx) : backend_(backend), ctx_(std::move(ctx)) {}
  ~ContextGuard() {
    try {
      backend_.close(ctx_);
    } catch (...) {
    }
  }
  const BackendContext& get() const { return ctx_; }

 private:
  Backend& backend_;
  BackendContext ctx_;
};

// Emits results strictly in dataset order from whichever thread completes
// the next missing index.
class OrderedWriter {
 public:
  OrderedWriter(std::size_t n, std::ostream* jsonl,
                std::function<void(const InstanceResult&)> callback)
      : pending_(n), jsonl_(jsonl), callback_(std::move(callback)) {}

  void submit(std::size_t index, InstanceResult result) {
    std::lock_guard<std::mutex> lock(mu_);
    pending_[index] = std::move(result);
    while (next_ < pending_.size() && pending_[next_]) {
      const InstanceResult& r = *pending_[next_];
      if (jsonl_) {
        *jsonl_ << result_line(r) << '\n';
        jsonl_->flush();
      }
      if (callback_) callback_(r);
      ++next_;
    }
  }

  std::vector<InstanceResult> take() {
    std::vector<InstanceResult> out;
    out.reserve(pending_.size());
    for (auto& r : pending_) out.push_back(std::move(*r));
    return out;
  }

 private:
  std::mutex mu_;
  std::vector<std::optional<InstanceResult>> pending_;
  std::size_t next_ = 0;
  std::ostream* jsonl_;
  std::function<void(const InstanceResult&)> callback_;
};

}  // namespace

InstanceResult optimize_instance(Backend& backend, const DatasetInstance& instance,
                                 const RunConfig& config, std::uint64_t instance_seed) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  InstanceResult result;
  result.instance_id = instance.id;
  result.instance_seed = instance_seed;

  ContextGuard ctx(backend, backend.encode(instance.visual, instance.query));
  const LatentState h0 = backend.initial_latents(ctx.get(), config.K);
  WarmupResult warm = warmup_run(backend, ctx.get(), h0, config.warmup);
  ReinforceResult reinforced =
      reinforce_run(backend, ctx.get(), warm.latents, config.reinforce, instance_seed);
  const DecodeOutput decoded =
      backend.decode_answer(ctx.get(), reinforced.best, config.max_decode_len);

  result.warmup_trace = std::move(warm.trace);
  result.reward_trace = std::move(reinforced.trace);
  result.answer_ids = decoded.token_ids;
  result.gold_match = decoded.token_ids == instance.gold_answer;
  result.output_token_count = decoded.token_ids.size() + config.K + 2;
  result.wall_time_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  spdlog::debug("{}: answer_len={} gold_match={} reward {:.4f} -> {:.4f}", instance.id,
                result.answer_ids.size(), result.gold_match, result.reward_trace.initial_reward,
                result.reward_trace.best_reward_per_step.empty()
                    ? result.reward_trace.initial_reward
                    : result.reward_trace.best_reward_per_step.back());
  return result;
}

InstanceResult optimize_instance(Backend& backend, const DatasetInstance& instance,
                                 const RunConfig& config) {
  return optimize_instance(backend, instance, config, derive_seed(config.seed, instance.id));
}

DatasetRun evaluate_dataset(Backend& backend, const std::vector<DatasetInstance>& instances,
                            const RunConfig& config, const DatasetOptions& options) {
  config.validate();
  require(!instances.empty(), ErrorCode::kInvalidArgument, "dataset is empty");
  {
    std::set<std::string> ids;
    for (const auto& inst : instances) {
      require(ids.insert(inst.id).second, ErrorCode::kInvalidArgument,
              "duplicate instance id " + inst.id);
    }
  }

  std::ofstream jsonl;
  std::filesystem::path jsonl_tmp;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    jsonl_tmp = *options.out_dir / "results.jsonl.partial";
    jsonl.open(jsonl_tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(jsonl), ErrorCode::kIo, "cannot write " + jsonl_tmp.string());
  }
  OrderedWriter writer(instances.size(), options.out_dir ? &jsonl : nullptr,
                       options.on_result);

  std::size_t workers = std::max<std::size_t>(1, options.workers);
  const std::size_t max_contexts = backend.info().max_contexts;
  if (max_contexts > 0) workers = std::min(workers, max_contexts);
  workers = std::min(workers, instances.size());

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < instances.size(); i = next.fetch_add(1)) {
      const DatasetInstance& inst = instances[i];
      const std::uint64_t seed = derive_seed(config.seed, inst.id);
      InstanceResult r;
      try {
        r = optimize_instance(backend, inst, config, seed);
      } catch (const std::exception& e) {
        r = InstanceResult{};
        r.instance_id = inst.id;
        r.instance_seed = seed;
        r.error = e.what();
        spdlog::warn("{} failed: {}", inst.id, e.what());
      }
      writer.submit(i, std::move(r));
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  DatasetRun run;
  run.results = writer.take();
  run.manifest = build_manifest(config, run.results);
  if (options.out_dir) {
    jsonl.close();
    std::filesystem::rename(jsonl_tmp, *options.out_dir / "results.jsonl");
    write_manifest(run.manifest, *options.out_dir / "manifest.json");
    if (options.write_trajectories) {
      write_trajectories(run.results, *options.out_dir / "trajectories.csv");
    }
  }
  spdlog::info("evaluated {} instances: accuracy {:.4f}, failures {}", run.results.size(),
               run.manifest.aggregate_accuracy, run.manifest.failures);
  return run;
}

DatasetInstance to_dataset_instance(const toy::ToyInstance& inst, std::string id) {
  return DatasetInstance{std::move(id), inst.visual, inst.query, inst.gold_answer};
}

std::vector<DatasetInstance> toy_dataset(std::size_t n, std::uint64_t seed,
                                         const toy::ToyTaskConfig& task) {
  std::vector<DatasetInstance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "toy-%06zu", i);
    // Task seeds stay below 2^40; pretraining draws from above it.
    const std::uint64_t task_seed = derive_seed(seed, id) & ((1ULL << 40) - 1);
    out.push_back(to_dataset_instance(toy::toy_task_sample(task_seed, task), id));
  }
  return out;
}

std::unique_ptr<Backend> make_backend(const RunConfig& config) {
  if (config.backend_kind == BackendKind::kToy) return toy::pretrained_toy_backend();
  require(config.backend_endpoint.has_value(), ErrorCode::kInvalidArgument,
          "remote backend needs an endpoint");
  return RemoteBackend::connect(*config.backend_endpoint);
}

}  // namespace latentforge
