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

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <deque>
#include <map>
#include <thread>

#include "doctest.h"
#include "latentforge/backend/remote_backend.hpp"
#include "latentforge/backend/toy_backend.hpp"
#include "latentforge/backend/toy_task.hpp"
#include "latentforge/pipeline/pipeline.hpp"

using namespace latentforge;
using nlohmann::json;

namespace {

// Replays canned reply lines and records what the client sent.
class CannedTransport : public LineTransport {
 public:
  explicit CannedTransport(std::deque<std::string> replies) : replies_(std::move(replies)) {}
  void send_line(const std::string& line) override { sent->push_back(line); }
  std::string recv_line() override {
    if (replies_.empty()) fail(ErrorCode::kIo, "connection closed by peer");
    std::string r = replies_.front();
    replies_.pop_front();
    return r;
  }
  std::shared_ptr<std::vector<std::string>> sent = std::make_shared<std::vector<std::string>>();

 private:
  std::deque<std::string> replies_;
};

const std::string kHello =
    R"({"type":"hello","ok":true,"latent_dim":4,"vocab_size":8,"latent_end_id":3,"max_contexts":2})";

// Minimal protocol server over a toy backend, one connection.
void serve(int fd, Backend& backend) {
  SocketTransport t(fd);
  std::map<std::string, BackendContext> contexts;
  for (;;) {
    std::string line;
    try {
      line = t.recv_line();
    } catch (const Error&) {
      return;
    }
    const json req = json::parse(line);
    const std::string type = req.at("type");
    json rep = {{"type", type}, {"ok", true}};
    try {
      if (type == "hello") {
        const BackendInfo info = backend.info();
        rep["latent_dim"] = info.latent_dim;
        rep["vocab_size"] = info.vocab_size;
        rep["latent_end_id"] = info.latent_end_id;
        rep["max_contexts"] = info.max_contexts;
      } else if (type == "encode") {
        VisualSpec v;
        v.patches = matrix_from_json(req.at("patches"), "patches");
        v.grid_rows = 1;
        v.grid_cols = v.patches.rows();
        const BackendContext ctx =
            backend.encode(v, QueryTokens{req.at("query").get<std::vector<TokenId>>()});
        contexts[req.at("id")] = ctx;
        rep["n_visual"] = ctx.n_visual;
        rep["visual_index_set"] = ctx.visual_index_set;
        rep["query_index_set"] = ctx.query_index_set;
        rep["seq_len"] = ctx.seq_len;
        rep["latent_dim"] = ctx.latent_dim;
      } else if (type == "initial_latents") {
        rep["latents"] = matrix_to_json(
            backend.initial_latents(contexts.at(req.at("id")), req.at("k")).vectors);
      } else if (type == "evaluate") {
        const EvalOutput e = backend.evaluate(
            contexts.at(req.at("id")), LatentState(matrix_from_json(req.at("latents"), "l")));
        rep["latent_logits"] = matrix_to_json(e.latent_logits);
        rep["qv_attention"] = matrix_to_json(e.qv_attention);
        rep["visual_embeddings"] = matrix_to_json(e.visual_embeddings);
        rep["latent_end_logit_per_position"] = e.latent_end_logit_per_position;
      } else if (type == "decode") {
        const DecodeOutput d = backend.decode_answer(
            contexts.at(req.at("id")), LatentState(matrix_from_json(req.at("latents"), "l")),
            req.at("max_len"));
        rep["token_ids"] = d.token_ids;
        rep["attention_share_latent"] = d.attention_share_latent;
        rep["attention_share_visual"] = d.attention_share_visual;
      } else if (type == "close") {
        backend.close(contexts.at(req.at("id")));
        contexts.erase(req.at("id").get<std::string>());
      } else {
        rep = {{"ok", false}, {"error", "unknown request " + type}};
      }
    } catch (const std::exception& e) {
      rep = {{"type", type}, {"ok", false}, {"error", e.what()}};
    }
    t.send_line(rep.dump());
  }
}

struct Loopback {
  std::unique_ptr<Backend> local = toy::ToyBackend::untrained(3);
  std::unique_ptr<Backend> server_side = toy::ToyBackend::untrained(3);
  std::thread server;
  std::unique_ptr<RemoteBackend> client;

  Loopback() {
    int fds[2];
    REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
    server = std::thread([this, fd = fds[1]] { serve(fd, *server_side); });
    client = std::make_unique<RemoteBackend>(std::make_unique<SocketTransport>(fds[0]));
  }
  ~Loopback() {
    client.reset();
    server.join();
  }
};

}  // namespace

TEST_CASE("remote client matches the local backend exactly over the wire") {
  Loopback lb;
  CHECK(lb.client->info().latent_dim == lb.local->info().latent_dim);
  CHECK(lb.client->info().vocab_size == lb.local->info().vocab_size);
  CHECK(lb.client->info().latent_end_id == lb.local->info().latent_end_id);

  const auto inst = toy::toy_task_sample(77);
  const BackendContext rc = lb.client->encode(inst.visual, inst.query);
  const BackendContext lc = lb.local->encode(inst.visual, inst.query);
  CHECK(rc.visual_index_set == lc.visual_index_set);
  CHECK(rc.query_index_set == lc.query_index_set);
  CHECK(rc.seq_len == lc.seq_len);

  const LatentState h = lb.client->initial_latents(rc, 4);
  CHECK(h == lb.local->initial_latents(lc, 4));
  CHECK(lb.client->evaluate(rc, h) == lb.local->evaluate(lc, h));
  CHECK(lb.client->decode_answer(rc, h, 5) == lb.local->decode_answer(lc, h, 5));
  lb.client->close(rc);
  lb.local->close(lc);
}

TEST_CASE("optimizer results are identical through the remote client") {
  Loopback lb;
  RunConfig c;
  c.warmup.n_sft = 2;
  c.reinforce.n_rl = 2;
  for (const auto& inst : toy_dataset(2, 5)) {
    const InstanceResult remote = optimize_instance(*lb.client, inst, c);
    const InstanceResult local = optimize_instance(*lb.local, inst, c);
    CHECK(result_line(remote) == result_line(local));
  }
}

TEST_CASE("server errors surface as protocol errors") {
  auto transport = std::make_unique<CannedTransport>(std::deque<std::string>{
      kHello, R"({"type":"encode","ok":false,"error":"out of contexts"})"});
  auto sent = transport->sent;
  RemoteBackend client(std::move(transport));
  CHECK(client.info().max_contexts == 2);
  const auto hello = json::parse(sent->at(0));
  CHECK(hello == json{{"type", "hello"}, {"version", 1}});

  VisualSpec v;
  v.patches = Matrix(2, 3);
  v.grid_rows = 1;
  v.grid_cols = 2;
  try {
    client.encode(v, QueryTokens{{1, 2}});
    FAIL("expected a protocol error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kProtocol);
    CHECK(std::string(e.what()).find("out of contexts") != std::string::npos);
  }
  const auto enc = json::parse(sent->at(1));
  CHECK(enc.at("type") == "encode");
  CHECK(enc.at("patches").size() == 2);
  CHECK(enc.at("query") == json::array({1, 2}));
}

TEST_CASE("malformed or inconsistent replies are rejected") {
  auto expect_protocol = [](std::deque<std::string> replies) {
    try {
      RemoteBackend client(std::make_unique<CannedTransport>(std::move(replies)));
      BackendContext ctx;
      ctx.instance_id = "ctx-0";
      client.initial_latents(ctx, 2);
      FAIL("expected a protocol error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kProtocol);
    }
  };
  expect_protocol({"{not json"});
  expect_protocol({R"({"type":"hello","ok":true,"latent_dim":4})"});
  expect_protocol({R"({"type":"hello","ok":true,"latent_dim":"4","vocab_size":8,)"
                   R"("latent_end_id":3,"max_contexts":0})"});
  expect_protocol({kHello, R"({"type":"evaluate","ok":true})"});
  expect_protocol({kHello, R"({"type":"initial_latents","ok":true,"latents":[[1,2,3,4]]})"});
  expect_protocol({kHello, R"({"type":"initial_latents","ok":true,"latents":[[1,2],[3]]})"});
  expect_protocol({kHello, R"([1,2,3])"});
}

TEST_CASE("closed connections raise io errors") {
  try {
    RemoteBackend client(std::make_unique<CannedTransport>(std::deque<std::string>{}));
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
}

TEST_CASE("tcp endpoint handshake") {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(listener >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
  REQUIRE(::listen(listener, 1) == 0);
  socklen_t len = sizeof(addr);
  REQUIRE(::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
  const int port = ntohs(addr.sin_port);

  auto backend = toy::ToyBackend::untrained(1);
  std::thread server([&] {
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd >= 0) serve(fd, *backend);
  });
  {
    auto client = RemoteBackend::connect("127.0.0.1:" + std::to_string(port));
    CHECK(client->info().latent_dim == backend->info().latent_dim);
  }
  server.join();
  ::close(listener);

  CHECK_THROWS_AS(tcp_connect("no-port"), Error);
  try {
    tcp_connect("127.0.0.1:" + std::to_string(port));
    FAIL("expected a refused connection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
}
