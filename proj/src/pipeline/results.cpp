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

#include "latentforge/pipeline/results.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "latentforge/rng.hpp"

namespace latentforge {
namespace {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp);
    out << text;
    if (!out) fail(ErrorCode::kIo, "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_at(const std::string& text, std::size_t base_offset, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what(), base_offset + e.byte);
  }
}

template <typename F>
auto field(const json& j, const char* key, F&& convert) {
  try {
    return convert(j.at(key));
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("field ") + key + ": " + e.what());
  }
}

}  // namespace

RunManifest build_manifest(const RunConfig& config,
                           const std::vector<InstanceResult>& results) {
  require(!results.empty(), ErrorCode::kInvalidArgument, "a run needs at least one instance");
  RunManifest m;
  m.config = config;
  m.config_hash = config_hash(config);
  m.seed = config.seed;
  std::set<std::string> ids;
  std::size_t correct = 0;
  for (const auto& r : results) {
    require(ids.insert(r.instance_id).second, ErrorCode::kInvalidArgument,
            "duplicate instance id " + r.instance_id);
    m.instances.push_back({r.instance_id, r.gold_match, r.error.has_value(), r.wall_time_ms});
    if (r.gold_match) ++correct;
    if (r.error) ++m.failures;
  }
  m.aggregate_accuracy = static_cast<double>(correct) / static_cast<double>(results.size());
  return m;
}

json to_json(const InstanceResult& r) {
  json j;
  j["instance_id"] = r.instance_id;
  j["instance_seed"] = r.instance_seed;
  j["warmup_trace"] = {{"loss_per_step", r.warmup_trace.loss_per_step},
                       {"grad_norm_per_step", r.warmup_trace.grad_norm_per_step}};
  j["reward_trace"] = {{"initial_reward", r.reward_trace.initial_reward},
                       {"sigma0_effective", r.reward_trace.sigma0_effective},
                       {"reward_per_step", r.reward_trace.reward_per_step},
                       {"best_reward_per_step", r.reward_trace.best_reward_per_step},
                       {"entropy_profiles", r.reward_trace.entropy_profiles}};
  j["answer_ids"] = r.answer_ids;
  j["gold_match"] = r.gold_match;
  j["output_token_count"] = r.output_token_count;
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  return j;
}

InstanceResult instance_result_from_json(const json& j) {
  InstanceResult r;
  auto str = [](const json& v) { return v.get<std::string>(); };
  auto u64 = [](const json& v) { return v.get<std::uint64_t>(); };
  auto reals = [](const json& v) { return v.get<std::vector<double>>(); };
  r.instance_id = field(j, "instance_id", str);
  r.instance_seed = field(j, "instance_seed", u64);
  const json& w = field(j, "warmup_trace", [](const json& v) -> const json& { return v; });
  r.warmup_trace.loss_per_step = field(w, "loss_per_step", reals);
  r.warmup_trace.grad_norm_per_step = field(w, "grad_norm_per_step", reals);
  const json& t = field(j, "reward_trace", [](const json& v) -> const json& { return v; });
  r.reward_trace.initial_reward = field(t, "initial_reward", [](const json& v) { return v.get<double>(); });
  r.reward_trace.sigma0_effective = field(t, "sigma0_effective", [](const json& v) { return v.get<double>(); });
  r.reward_trace.reward_per_step = field(t, "reward_per_step", reals);
  r.reward_trace.best_reward_per_step = field(t, "best_reward_per_step", reals);
  r.reward_trace.entropy_profiles = field(
      t, "entropy_profiles", [](const json& v) { return v.get<std::vector<std::vector<double>>>(); });
  r.answer_ids = field(j, "answer_ids", [](const json& v) { return v.get<std::vector<TokenId>>(); });
  r.gold_match = field(j, "gold_match", [](const json& v) { return v.get<bool>(); });
  r.output_token_count = field(j, "output_token_count", [](const json& v) { return v.get<std::size_t>(); });
  if (j.contains("error") && !j.at("error").is_null()) r.error = field(j, "error", str);
  return r;
}

json to_json(const RunManifest& m) {
  json index = json::array();
  for (const auto& e : m.instances) {
    index.push_back({{"instance_id", e.instance_id},
                     {"gold_match", e.gold_match},
                     {"failed", e.failed},
                     {"wall_time_ms", e.wall_time_ms}});
  }
  return {{"format_version", m.format_version},
          {"library_version", m.library_version},
          {"config", to_json(m.config)},
          {"config_hash", m.config_hash},
          {"seed", m.seed},
          {"instances", std::move(index)},
          {"aggregate_accuracy", m.aggregate_accuracy},
          {"failures", m.failures}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.format_version = field(j, "format_version", [](const json& v) { return v.get<int>(); });
  m.library_version = field(j, "library_version", [](const json& v) { return v.get<std::string>(); });
  require(m.format_version <= kManifestFormatVersion, ErrorCode::kVersionMismatch,
          "manifest format version " + std::to_string(m.format_version) +
              " is newer than supported version " + std::to_string(kManifestFormatVersion) +
              " (written by library " + m.library_version + ")");
  require(m.format_version == kManifestFormatVersion, ErrorCode::kVersionMismatch,
          "unsupported manifest format version " + std::to_string(m.format_version));
  m.config = run_config_from_json(field(j, "config", [](const json& v) { return v; }));
  m.config_hash = field(j, "config_hash", [](const json& v) { return v.get<std::string>(); });
  m.seed = field(j, "seed", [](const json& v) { return v.get<std::uint64_t>(); });
  const json& index = field(j, "instances", [](const json& v) -> const json& { return v; });
  require(index.is_array(), ErrorCode::kParse, "instances must be an array");
  for (const json& e : index) {
    ManifestEntry entry;
    entry.instance_id = field(e, "instance_id", [](const json& v) { return v.get<std::string>(); });
    entry.gold_match = field(e, "gold_match", [](const json& v) { return v.get<bool>(); });
    entry.failed = field(e, "failed", [](const json& v) { return v.get<bool>(); });
    entry.wall_time_ms = field(e, "wall_time_ms", [](const json& v) { return v.get<double>(); });
    m.instances.push_back(std::move(entry));
  }
  m.aggregate_accuracy = field(j, "aggregate_accuracy", [](const json& v) { return v.get<double>(); });
  m.failures = field(j, "failures", [](const json& v) { return v.get<std::size_t>(); });
  return m;
}

std::string result_line(const InstanceResult& r) { return to_json(r).dump(); }

std::string result_digest(const InstanceResult& r) { return hex64(fnv1a64(result_line(r))); }

void write_results(const std::vector<InstanceResult>& results,
                   const std::filesystem::path& path) {
  std::string text;
  for (const auto& r : results) {
    text += result_line(r);
    text += '\n';
  }
  write_text(path, text);
}

std::vector<InstanceResult> read_results(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  std::vector<InstanceResult> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    if (end > pos) {
      const json j = parse_at(text.substr(pos, end - pos), pos, path.string());
      out.push_back(instance_result_from_json(j));
    }
    pos = end + 1;
  }
  return out;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  write_text(path, to_json(manifest).dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& path) {
  return manifest_from_json(parse_at(read_text(path), 0, path.string()));
}

void write_trajectories(const std::vector<InstanceResult>& results,
                        const std::filesystem::path& path) {
  std::size_t k_max = 0;
  for (const auto& r : results) {
    for (const auto& e : r.reward_trace.entropy_profiles) k_max = std::max(k_max, e.size());
  }
  std::ostringstream out;
  out.precision(17);
  out << "instance_id,stage,step,loss,grad_norm,reward,best_reward";
  for (std::size_t k = 0; k < k_max; ++k) out << ",entropy_" << (k + 1);
  out << '\n';
  for (const auto& r : results) {
    const auto& w = r.warmup_trace;
    for (std::size_t s = 0; s < w.loss_per_step.size(); ++s) {
      out << r.instance_id << ",warmup," << s << ',' << w.loss_per_step[s] << ',';
      if (s < w.grad_norm_per_step.size()) out << w.grad_norm_per_step[s];
      out << ",,";
      for (std::size_t k = 0; k < k_max; ++k) out << ',';
      out << '\n';
    }
    const auto& t = r.reward_trace;
    for (std::size_t s = 0; s < t.reward_per_step.size(); ++s) {
      out << r.instance_id << ",reinforce," << s << ",,," << t.reward_per_step[s] << ','
          << t.best_reward_per_step[s];
      for (std::size_t k = 0; k < k_max; ++k) {
        out << ',';
        if (k < t.entropy_profiles[s].size()) out << t.entropy_profiles[s][k];
      }
      out << '\n';
    }
  }
  write_text(path, out.str());
}

}  // namespace latentforge
