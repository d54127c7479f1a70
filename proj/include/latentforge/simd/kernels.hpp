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

// Inner-loop kernels with one scalar reference and per-ISA variants chosen at
// runtime.
//
// Every variant follows the same canonical evaluation order, so results are
// bit-identical across ISAs:
//   dot:  four interleaved fused-multiply-add accumulators over blocks of 4
//         (lane j takes elements i with i % 4 == j), reduced as
//         (acc0 + acc2) + (acc1 + acc3), then the tail folded in with fma.
//   axpy: y[i] = fma(alpha, x[i], y[i]) elementwise.
//
// LATENTFORGE_SIMD=scalar|avx2|neon overrides the automatic choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace latentforge::simd {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

std::string_view isa_name(Isa isa);

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

const KernelTable& active_kernels();
// Forces a variant; returns false (and leaves the selection alone) when the
// variant is unavailable on this machine.
bool select_isa(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active_kernels().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace latentforge::simd
