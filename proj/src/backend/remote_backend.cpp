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

#include "latentforge/backend/remote_backend.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace latentforge {
namespace {

using nlohmann::json;

template <typename T>
T get_field(const json& reply, const char* key) {
  if (!reply.contains(key)) fail(ErrorCode::kProtocol, std::string("reply lacks field ") + key);
  try {
    return reply.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kProtocol, std::string("reply field ") + key + " has the wrong type");
  }
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* what) {
  require(j.is_array(), ErrorCode::kProtocol, std::string(what) + " must be an array of rows");
  std::vector<std::vector<double>> rows;
  try {
    rows = j.get<std::vector<std::vector<double>>>();
  } catch (const json::exception&) {
    fail(ErrorCode::kProtocol, std::string(what) + " must hold numeric rows");
  }
  for (const auto& r : rows) {
    require(r.size() == rows.front().size(), ErrorCode::kProtocol,
            std::string(what) + " rows differ in length");
  }
  return Matrix::from_rows(rows);
}

SocketTransport::SocketTransport(int fd) : fd_(fd) {}

SocketTransport::~SocketTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void SocketTransport::send_line(const std::string& line) {
  std::string data = line;
  data += '\n';
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kIo, std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string SocketTransport::recv_line() {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[65536];
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kIo, std::string("recv failed: ") + std::strerror(errno));
    }
    if (n == 0) fail(ErrorCode::kIo, "connection closed by peer");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::unique_ptr<LineTransport> tcp_connect(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  require(colon != std::string::npos && colon > 0 && colon + 1 < endpoint.size(),
          ErrorCode::kInvalidArgument, "endpoint must be host:port, got " + endpoint);
  std::string host = endpoint.substr(0, colon);
  if (host.size() > 2 && host.front() == '[' && host.back() == ']') {
    host = host.substr(1, host.size() - 2);
  }
  const std::string port = endpoint.substr(colon + 1);

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &found); rc != 0) {
    fail(ErrorCode::kIo, "cannot resolve " + endpoint + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  std::string last_error = "no addresses";
  for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    last_error = std::strerror(errno);
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) fail(ErrorCode::kIo, "cannot connect to " + endpoint + ": " + last_error);
  return std::make_unique<SocketTransport>(fd);
}

RemoteBackend::RemoteBackend(std::unique_ptr<LineTransport> transport)
    : transport_(std::move(transport)) {
  require(transport_ != nullptr, ErrorCode::kInvalidArgument, "null transport");
  const json reply = call({{"type", "hello"}, {"version", kProtocolVersion}});
  info_.latent_dim = get_field<std::size_t>(reply, "latent_dim");
  info_.vocab_size = get_field<std::size_t>(reply, "vocab_size");
  info_.latent_end_id = get_field<TokenId>(reply, "latent_end_id");
  info_.max_contexts = get_field<std::size_t>(reply, "max_contexts");
  require(info_.latent_dim >= 1 && info_.vocab_size >= 1, ErrorCode::kProtocol,
          "server declared an empty latent or vocabulary size");
}

std::unique_ptr<RemoteBackend> RemoteBackend::connect(const std::string& endpoint) {
  return std::make_unique<RemoteBackend>(tcp_connect(endpoint));
}

json RemoteBackend::call(const json& request) {
  std::lock_guard<std::mutex> lock(mu_);
  transport_->send_line(request.dump());
  const std::string line = transport_->recv_line();
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kProtocol, std::string("malformed reply: ") + e.what());
  }
  require(reply.is_object(), ErrorCode::kProtocol, "reply must be a JSON object");
  const std::string type = request.at("type").get<std::string>();
  if (!get_field<bool>(reply, "ok")) {
    const std::string message =
        reply.contains("error") && reply.at("error").is_string()
            ? reply.at("error").get<std::string>()
            : std::string("unspecified server error");
    fail(ErrorCode::kProtocol, type + " rejected: " + message);
  }
  if (reply.contains("type")) {
    require(reply.at("type") == type, ErrorCode::kProtocol,
            "reply type does not match request " + type);
  }
  return reply;
}

BackendContext RemoteBackend::encode(const VisualSpec& visual, const QueryTokens& query) {
  visual.validate();
  require(!query.ids.empty(), ErrorCode::kInvalidArgument, "empty query");
  std::string id;
  {
    std::lock_guard<std::mutex> lock(mu_);
    id = "ctx-" + std::to_string(next_id_++);
  }
  const json reply = call({{"type", "encode"},
                           {"id", id},
                           {"patches", matrix_to_json(visual.patches)},
                           {"query", query.ids}});
  BackendContext ctx;
  ctx.instance_id = id;
  ctx.n_visual = get_field<std::size_t>(reply, "n_visual");
  ctx.visual_index_set = get_field<std::vector<std::size_t>>(reply, "visual_index_set");
  ctx.query_index_set = get_field<std::vector<std::size_t>>(reply, "query_index_set");
  ctx.seq_len = get_field<std::size_t>(reply, "seq_len");
  ctx.latent_dim = get_field<std::size_t>(reply, "latent_dim");
  try {
    ctx.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kProtocol, std::string("inconsistent encode reply: ") + e.what());
  }
  require(ctx.n_visual == visual.n_patches(), ErrorCode::kProtocol,
          "server visual token count differs from the patch count");
  return ctx;
}

LatentState RemoteBackend::initial_latents(const BackendContext& ctx, std::size_t k) {
  require(k >= 1, ErrorCode::kPrecondition, "latent length must be >= 1");
  const json reply =
      call({{"type", "initial_latents"}, {"id", ctx.instance_id}, {"k", k}});
  if (!reply.contains("latents")) fail(ErrorCode::kProtocol, "reply lacks field latents");
  LatentState h(matrix_from_json(reply.at("latents"), "latents"));
  require(h.k() == k && h.dim() == info_.latent_dim, ErrorCode::kProtocol,
          "initial latents have the wrong shape");
  require(h.vectors.all_finite(), ErrorCode::kProtocol, "initial latents are not finite");
  return h;
}

EvalOutput RemoteBackend::evaluate(const BackendContext& ctx, const LatentState& latents) {
  require(latents.dim() == info_.latent_dim, ErrorCode::kDimensionMismatch,
          "latent width does not match the server latent_dim");
  const json reply = call({{"type", "evaluate"},
                           {"id", ctx.instance_id},
                           {"latents", matrix_to_json(latents.vectors)}});
  auto matrix = [&](const char* key) {
    if (!reply.contains(key)) fail(ErrorCode::kProtocol, std::string("reply lacks field ") + key);
    return matrix_from_json(reply.at(key), key);
  };
  EvalOutput out;
  out.latent_logits = matrix("latent_logits");
  out.qv_attention = matrix("qv_attention");
  out.visual_embeddings = matrix("visual_embeddings");
  out.latent_end_logit_per_position =
      get_field<std::vector<double>>(reply, "latent_end_logit_per_position");
  require(out.latent_logits.rows() == latents.k() &&
              out.latent_logits.cols() == info_.vocab_size,
          ErrorCode::kProtocol, "latent_logits shape");
  require(out.qv_attention.rows() == ctx.query_index_set.size() &&
              out.qv_attention.cols() == ctx.n_visual,
          ErrorCode::kProtocol, "qv_attention shape");
  require(out.visual_embeddings.rows() == ctx.n_visual &&
              out.visual_embeddings.cols() == info_.latent_dim,
          ErrorCode::kProtocol, "visual_embeddings shape");
  require(out.latent_end_logit_per_position.size() == latents.k(), ErrorCode::kProtocol,
          "latent_end_logit_per_position length");
  return out;
}

DecodeOutput RemoteBackend::decode_answer(const BackendContext& ctx, const LatentState& latents,
                                          std::size_t max_len) {
  const json reply = call({{"type", "decode"},
                           {"id", ctx.instance_id},
                           {"latents", matrix_to_json(latents.vectors)},
                           {"max_len", max_len}});
  DecodeOutput out;
  out.token_ids = get_field<std::vector<TokenId>>(reply, "token_ids");
  out.attention_share_latent = get_field<double>(reply, "attention_share_latent");
  out.attention_share_visual = get_field<double>(reply, "attention_share_visual");
  require(out.token_ids.size() <= max_len, ErrorCode::kProtocol,
          "decode returned more than max_len tokens");
  return out;
}

void RemoteBackend::close(const BackendContext& ctx) {
  call({{"type", "close"}, {"id", ctx.instance_id}});
}

}  // namespace latentforge
