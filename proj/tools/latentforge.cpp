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

// latentforge: optimize | eval | silencing-demo | probe-server
//
// Exit codes: 0 success, 1 some dataset instances failed, 2 usage or
// runtime error.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "latentforge/backend/remote_backend.hpp"
#include "latentforge/backend/toy_trainer.hpp"
#include "latentforge/diagnostics.hpp"
#include "latentforge/logging.hpp"
#include "latentforge/pipeline/pipeline.hpp"

namespace lf = latentforge;

namespace {

struct RunFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::string endpoint;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_path, "RunConfig JSON file");
  cmd->add_option("--seed", f.seed, "Run seed (overrides the config)");
  cmd->add_option("--backend", f.backend, "toy or remote")->check(CLI::IsMember({"toy", "remote"}));
  cmd->add_option("--endpoint", f.endpoint, "Remote backend host:port");
}

lf::RunConfig resolve_config(const RunFlags& f) {
  lf::RunConfig c = f.config_path.empty() ? lf::RunConfig{} : lf::load_run_config(f.config_path);
  if (f.seed) c.seed = *f.seed;
  if (!f.backend.empty()) c.backend_kind = lf::parse_backend_kind(f.backend);
  if (!f.endpoint.empty()) c.backend_endpoint = f.endpoint;
  c.validate();
  return c;
}

int run_optimize(const RunFlags& flags, std::size_t index) {
  const lf::RunConfig config = resolve_config(flags);
  auto backend = lf::make_backend(config);
  const auto data = lf::toy_dataset(index + 1, config.seed);
  const lf::InstanceResult r = lf::optimize_instance(*backend, data[index], config);
  std::cout << lf::result_line(r) << '\n';
  return 0;
}

int run_eval(const RunFlags& flags, std::size_t n, const std::string& out, std::size_t workers,
             bool trajectories) {
  const lf::RunConfig config = resolve_config(flags);
  auto backend = lf::make_backend(config);
  lf::DatasetOptions opts;
  opts.workers = workers;
  if (!out.empty()) opts.out_dir = out;
  opts.write_trajectories = trajectories;
  const lf::DatasetRun run =
      lf::evaluate_dataset(*backend, lf::toy_dataset(n, config.seed), config, opts);
  std::cout << "accuracy " << run.manifest.aggregate_accuracy << " over " << n
            << " instances, failures " << run.manifest.failures << ", config_hash "
            << run.manifest.config_hash << '\n';
  return run.manifest.failures > 0 ? 1 : 0;
}

int run_silencing(std::size_t seeds, const std::string& out, lf::diagnostics::JointTrainConfig base,
                  std::size_t jobs) {
  const auto initial = lf::toy::load_or_pretrain(lf::toy::PretrainConfig{});
  std::vector<std::pair<std::string, lf::diagnostics::SilencingReport>> arms(2 * seeds);
  std::vector<lf::diagnostics::JointTrainConfig> configs;
  for (std::size_t s = 0; s < seeds; ++s) {
    for (int half = 0; half < 2; ++half) {
      auto c = base;
      c.seed = base.seed + s;
      if (half) c.lambda *= 0.5;
      configs.push_back(c);
      arms[configs.size() - 1].first = half ? "lambda_half" : "lambda";
    }
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      arms[i].second = lf::diagnostics::silencing_demo(configs[i], *initial);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < std::max<std::size_t>(1, jobs); ++j) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  lf::diagnostics::write_silencing_outputs(arms, out);
  for (const auto& [arm, r] : arms) {
    const auto& first = r.checkpoints.front();
    const auto& last = r.checkpoints.back();
    std::printf("seed %llu %-11s align %.4f -> %.4f  latent_end %.3f -> %.3f  donated %.3f -> %.3f\n",
                static_cast<unsigned long long>(r.config.seed), arm.c_str(), first.alignment_loss,
                last.alignment_loss, first.latent_end_logit, last.latent_end_logit,
                first.donated_latents_accuracy, last.donated_latents_accuracy);
  }
  return 0;
}

int run_probe(const std::string& endpoint) {
  auto backend = lf::RemoteBackend::connect(endpoint);
  const lf::BackendInfo info = backend->info();
  std::cout << nlohmann::json{{"endpoint", endpoint},
                              {"protocol_version", lf::kProtocolVersion},
                              {"latent_dim", info.latent_dim},
                              {"vocab_size", info.vocab_size},
                              {"latent_end_id", info.latent_end_id},
                              {"max_contexts", info.max_contexts}}
                   .dump()
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  lf::init_logging_from_env();
  CLI::App app{"Inference-time latent optimization over a model backend"};
  app.require_subcommand(1);

  RunFlags opt_flags;
  std::size_t opt_index = 0;
  auto* optimize = app.add_subcommand("optimize", "Optimize one toy instance and print its result");
  add_run_flags(optimize, opt_flags);
  optimize->add_option("--instance", opt_index, "Toy dataset index");

  RunFlags eval_flags;
  std::size_t n_instances = 100;
  std::size_t workers = 1;
  std::string eval_out;
  bool trajectories = false;
  auto* eval = app.add_subcommand("eval", "Run a toy dataset and write results");
  add_run_flags(eval, eval_flags);
  eval->add_option("--n-instances", n_instances, "Number of toy instances")
      ->check(CLI::PositiveNumber);
  eval->add_option("--out", eval_out, "Output directory");
  eval->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  eval->add_flag("--trajectories", trajectories, "Also write trajectories.csv");

  std::size_t seeds = 5;
  std::size_t jobs = 1;
  std::string sil_out = "silencing";
  lf::diagnostics::JointTrainConfig joint;
  auto* silencing = app.add_subcommand("silencing-demo", "Joint-training silencing diagnostics");
  silencing->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);
  silencing->add_option("--out", sil_out, "Output directory");
  silencing->add_option("--lambda", joint.lambda, "Answer-loss weight");
  silencing->add_option("--steps", joint.steps, "Training steps");
  silencing->add_option("--learning-rate", joint.learning_rate, "Adam learning rate");
  silencing->add_option("--checkpoint-every", joint.checkpoint_every, "Steps between checkpoints");
  silencing->add_option("--first-seed", joint.seed, "Seed of the first run");
  silencing->add_option("--jobs", jobs, "Runs in parallel");

  std::string probe_endpoint;
  auto* probe = app.add_subcommand("probe-server", "Check the protocol handshake");
  probe->add_option("--endpoint", probe_endpoint, "host:port")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*optimize) return run_optimize(opt_flags, opt_index);
    if (*eval) return run_eval(eval_flags, n_instances, eval_out, workers, trajectories);
    if (*silencing) return run_silencing(seeds, sil_out, joint, jobs);
    if (*probe) return run_probe(probe_endpoint);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 2;
}
