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

#include <cstddef>

#include "latentforge/backend/types.hpp"

namespace latentforge {

// Everything the latent optimizer needs from a frozen model. Implementations
// never modify model parameters; evaluate() and decode_answer() are pure in
// (ctx inputs, latents).
//
// A context is used by one worker at a time. Distinct contexts may be used
// concurrently up to info().max_contexts.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendInfo info() const = 0;

  virtual BackendContext encode(const VisualSpec& visual,
                                const QueryTokens& query) = 0;

  virtual LatentState initial_latents(const BackendContext& ctx,
                                      std::size_t k) = 0;

  virtual EvalOutput evaluate(const BackendContext& ctx,
                              const LatentState& latents) = 0;

  // Greedy decoding from the position after <latent_end>.
  virtual DecodeOutput decode_answer(const BackendContext& ctx,
                                     const LatentState& latents,
                                     std::size_t max_len) = 0;

  // Releases per-context state. Unknown ids are ignored.
  virtual void close(const BackendContext& ctx) = 0;
};

}  // namespace latentforge
