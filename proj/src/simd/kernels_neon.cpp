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

#include <cmath>
#include <cstddef>

#include "latentforge/simd/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace latentforge::simd {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  // lo holds lanes (0, 1), hi holds lanes (2, 3).
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lo = vfmaq_f64(lo, vld1q_f64(a + i), vld1q_f64(b + i));
    hi = vfmaq_f64(hi, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  float64x2_t pair = vaddq_f64(lo, hi);
  double sum = vgetq_lane_f64(pair, 0) + vgetq_lane_f64(pair, 1);
  for (; i < n; ++i) sum = std::fma(a[i], b[i], sum);
  return sum;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), a, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

constexpr KernelTable kNeonTable{Isa::kNeon, &dot_neon, &axpy_neon};

}  // namespace

const KernelTable* neon_kernels() { return &kNeonTable; }

}  // namespace latentforge::simd

#else

namespace latentforge::simd {
const KernelTable* neon_kernels() { return nullptr; }
}  // namespace latentforge::simd

#endif
