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

// Client for the newline-delimited JSON backend protocol.
//
//   -> {"type":"hello","version":1}
//   <- {"type":"hello","ok":true,"latent_dim":d,"vocab_size":V,
//       "latent_end_id":id,"max_contexts":n}
//   -> {"type":"encode","id":s,"patches":[[..]],"query":[..]}
//   <- {"type":"encode","ok":true,"n_visual":N,"visual_index_set":[..],
//       "query_index_set":[..],"seq_len":M,"latent_dim":d}
//   -> {"type":"initial_latents","id":s,"k":K}
//   <- {"type":"initial_latents","ok":true,"latents":[[..]]}
//   -> {"type":"evaluate","id":s,"latents":[[..]]}
//   <- {"type":"evaluate","ok":true,"latent_logits":..,"qv_attention":..,
//       "visual_embeddings":..,"latent_end_logit_per_position":..}
//   -> {"type":"decode","id":s,"latents":[[..]],"max_len":n}
//   <- {"type":"decode","ok":true,"token_ids":[..],
//       "attention_share_latent":x,"attention_share_visual":y}
//   -> {"type":"close","id":s}
//   <- {"type":"close","ok":true}
//
// Any reply may instead be {"ok":false,"error":"..."}, raised as
// Error(kProtocol). Calls are serialized over one connection.

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"
#include "latentforge/backend/backend.hpp"

namespace latentforge {

inline constexpr int kProtocolVersion = 1;

// A bidirectional stream of text lines (without the trailing newline).
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void send_line(const std::string& line) = 0;
  // Throws Error(kIo) when the peer has closed the stream.
  virtual std::string recv_line() = 0;
};

// Owns a connected stream socket.
class SocketTransport final : public LineTransport {
 public:
  explicit SocketTransport(int fd);
  ~SocketTransport() override;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  void send_line(const std::string& line) override;
  std::string recv_line() override;

 private:
  int fd_;
  std::string buffer_;
};

// "host:port" over TCP.
std::unique_ptr<LineTransport> tcp_connect(const std::string& endpoint);

class RemoteBackend final : public Backend {
 public:
  // Performs the handshake; throws on a version or protocol error.
  explicit RemoteBackend(std::unique_ptr<LineTransport> transport);

  static std::unique_ptr<RemoteBackend> connect(const std::string& endpoint);

  BackendInfo info() const override { return info_; }
  BackendContext encode(const VisualSpec& visual, const QueryTokens& query) override;
  LatentState initial_latents(const BackendContext& ctx, std::size_t k) override;
  EvalOutput evaluate(const BackendContext& ctx, const LatentState& latents) override;
  DecodeOutput decode_answer(const BackendContext& ctx, const LatentState& latents,
                             std::size_t max_len) override;
  void close(const BackendContext& ctx) override;

 private:
  nlohmann::json call(const nlohmann::json& request);

  std::unique_ptr<LineTransport> transport_;
  std::mutex mu_;
  BackendInfo info_;
  std::uint64_t next_id_ = 0;
};

// Matrix <-> nested JSON arrays.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const char* what);

}  // namespace latentforge
