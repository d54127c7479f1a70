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

#include "latentforge/pipeline/config.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>

#include "latentforge/rng.hpp"

namespace latentforge {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  require(j.is_object(), ErrorCode::kInvalidArgument, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    for (const char* k : known) found = found || key == k;
    require(found, ErrorCode::kInvalidArgument, "unknown config field " + where + key);
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kInvalidArgument, "config field " + where + key + " has the wrong type");
  }
}

}  // namespace

const char* backend_kind_name(BackendKind kind) {
  return kind == BackendKind::kToy ? "toy" : "remote";
}

BackendKind parse_backend_kind(const std::string& name) {
  if (name == "toy") return BackendKind::kToy;
  if (name == "remote") return BackendKind::kRemote;
  fail(ErrorCode::kInvalidArgument, "backend_kind must be toy or remote, got " + name);
}

void RunConfig::validate() const {
  require(K >= 1, ErrorCode::kInvalidArgument, "K must be >= 1");
  require(max_decode_len >= 1, ErrorCode::kInvalidArgument, "max_decode_len must be >= 1");
  warmup.validate();
  reinforce.validate();
  require(backend_kind != BackendKind::kRemote || backend_endpoint.has_value(),
          ErrorCode::kInvalidArgument, "remote backend needs backend_endpoint");
}

json to_json(const RunConfig& c) {
  json j;
  j["K"] = c.K;
  j["warmup"] = {{"tau", c.warmup.tau},
                 {"learning_rate", c.warmup.learning_rate},
                 {"n_sft", c.warmup.n_sft},
                 {"pos_num", c.warmup.pos_num},
                 {"neg_num", c.warmup.neg_num}};
  j["reinforce"] = {{"alpha", c.reinforce.alpha},
                    {"sigma0", c.reinforce.sigma0},
                    {"sigma0_relative", c.reinforce.sigma0_relative},
                    {"gamma", c.reinforce.gamma},
                    {"delta", c.reinforce.delta},
                    {"n_rl", c.reinforce.n_rl}};
  j["backend_kind"] = backend_kind_name(c.backend_kind);
  j["backend_endpoint"] = c.backend_endpoint ? json(*c.backend_endpoint) : json(nullptr);
  j["max_decode_len"] = c.max_decode_len;
  j["seed"] = c.seed;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, {"K", "warmup", "reinforce", "backend_kind", "backend_endpoint",
                     "max_decode_len", "seed"},
                 "");
  RunConfig c;
  read_field(j, "K", c.K, "");
  if (j.contains("warmup")) {
    const json& w = j.at("warmup");
    reject_unknown(w, {"tau", "learning_rate", "n_sft", "pos_num", "neg_num"}, "warmup.");
    read_field(w, "tau", c.warmup.tau, "warmup.");
    read_field(w, "learning_rate", c.warmup.learning_rate, "warmup.");
    read_field(w, "n_sft", c.warmup.n_sft, "warmup.");
    read_field(w, "pos_num", c.warmup.pos_num, "warmup.");
    read_field(w, "neg_num", c.warmup.neg_num, "warmup.");
  }
  if (j.contains("reinforce")) {
    const json& r = j.at("reinforce");
    reject_unknown(r, {"alpha", "sigma0", "sigma0_relative", "gamma", "delta", "n_rl"},
                   "reinforce.");
    read_field(r, "alpha", c.reinforce.alpha, "reinforce.");
    read_field(r, "sigma0", c.reinforce.sigma0, "reinforce.");
    read_field(r, "sigma0_relative", c.reinforce.sigma0_relative, "reinforce.");
    read_field(r, "gamma", c.reinforce.gamma, "reinforce.");
    read_field(r, "delta", c.reinforce.delta, "reinforce.");
    read_field(r, "n_rl", c.reinforce.n_rl, "reinforce.");
  }
  if (j.contains("backend_kind")) {
    std::string kind;
    read_field(j, "backend_kind", kind, "");
    c.backend_kind = parse_backend_kind(kind);
  }
  if (j.contains("backend_endpoint") && !j.at("backend_endpoint").is_null()) {
    std::string ep;
    read_field(j, "backend_endpoint", ep, "");
    c.backend_endpoint = ep;
  }
  read_field(j, "max_decode_len", c.max_decode_len, "");
  read_field(j, "seed", c.seed, "");
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what(), e.byte);
  }
  return run_config_from_json(j);
}

std::string canonical_config(const RunConfig& config) { return to_json(config).dump(); }

std::string config_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config(config))));
  return buf;
}

}  // namespace latentforge
