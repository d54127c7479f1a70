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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "latentforge/simd/kernels.hpp"

namespace latentforge::simd {
namespace {

const KernelTable* find(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return &scalar_kernels();
    case Isa::kAvx2:
      return avx2_kernels();
    case Isa::kNeon:
      return neon_kernels();
  }
  return nullptr;
}

const KernelTable* detect() {
  if (const char* forced = std::getenv("LATENTFORGE_SIMD")) {
    std::string_view name(forced);
    for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
      if (name == isa_name(isa)) {
        if (const KernelTable* table = find(isa)) return table;
      }
    }
  }
  if (const KernelTable* table = avx2_kernels()) return table;
  if (const KernelTable* table = neon_kernels()) return table;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

const KernelTable& active_kernels() {
  return *slot().load(std::memory_order_relaxed);
}

bool select_isa(Isa isa) {
  const KernelTable* table = find(isa);
  if (table == nullptr) return false;
  slot().store(table, std::memory_order_relaxed);
  return true;
}

}  // namespace latentforge::simd
