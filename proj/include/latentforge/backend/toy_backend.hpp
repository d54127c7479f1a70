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
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "latentforge/backend/backend.hpp"
#include "latentforge/backend/toy_transformer.hpp"

namespace latentforge::toy {

// Stateless inference helpers shared by the backend and the diagnostics.

// K-step rollout from <latent_start>: the final hidden state of step t is
// fed back as latent t.
Matrix rollout_latents(const ToyTransformer& model, const Matrix& patches,
                       const std::vector<TokenId>& query, std::size_t k);

EvalOutput evaluate_latents(const ToyTransformer& model, const Matrix& patches,
                            const std::vector<TokenId>& query,
                            const Matrix& latents);

DecodeOutput greedy_decode(const ToyTransformer& model, const Matrix& patches,
                           const std::vector<TokenId>& query,
                           const Matrix& latents, std::size_t max_len);

class ToyBackend final : public Backend {
 public:
  explicit ToyBackend(std::shared_ptr<const ToyTransformer> model);

  // Seeded random initialization, no training.
  static std::unique_ptr<ToyBackend> untrained(std::uint64_t seed,
                                               const ModelConfig& cfg = {});

  BackendInfo info() const override;
  BackendContext encode(const VisualSpec& visual, const QueryTokens& query) override;
  LatentState initial_latents(const BackendContext& ctx, std::size_t k) override;
  EvalOutput evaluate(const BackendContext& ctx, const LatentState& latents) override;
  DecodeOutput decode_answer(const BackendContext& ctx, const LatentState& latents,
                             std::size_t max_len) override;
  void close(const BackendContext& ctx) override;

  const ToyTransformer& model() const { return *model_; }
  std::shared_ptr<const ToyTransformer> shared_model() const { return model_; }
  std::size_t open_contexts() const;

 private:
  struct Stored {
    Matrix patches;
    std::vector<TokenId> query;
  };
  std::shared_ptr<const Stored> lookup(const BackendContext& ctx) const;

  std::shared_ptr<const ToyTransformer> model_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<const Stored>> contexts_;
  std::uint64_t next_id_ = 0;
};

}  // namespace latentforge::toy
