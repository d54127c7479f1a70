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

#include <span>

#include "latentforge/tensor.hpp"

namespace latentforge {

// x (n x a) times w (a x b).
Matrix matmul(const Matrix& x, const Matrix& w);
// x (n x a) times transpose(w) where w is (b x a).
Matrix matmul_transposed(const Matrix& x, const Matrix& w);
// acc (a x b) += transpose(x) * dy, with x (n x a) and dy (n x b).
void accumulate_xt_dy(Matrix& acc, const Matrix& x, const Matrix& dy);

void add_row_bias(Matrix& x, std::span<const double> bias);
void accumulate_column_sums(std::span<double> acc, const Matrix& dy);

double l2_norm(std::span<const double> v);
// Root-mean-square over every entry.
double rms(const Matrix& m);

}  // namespace latentforge
