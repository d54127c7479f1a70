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

#include "latentforge/linalg.hpp"

#include <cmath>

#include "latentforge/simd/kernels.hpp"

namespace latentforge {

Matrix matmul(const Matrix& x, const Matrix& w) {
  require(x.cols() == w.rows(), ErrorCode::kDimensionMismatch, "matmul shapes");
  Matrix out(x.rows(), w.cols());
  const auto& k = simd::active_kernels();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* dst = out.row(r).data();
    for (std::size_t i = 0; i < x.cols(); ++i) {
      const double coeff = x(r, i);
      if (coeff != 0.0) k.axpy(coeff, w.row(i).data(), dst, w.cols());
    }
  }
  return out;
}

Matrix matmul_transposed(const Matrix& x, const Matrix& w) {
  require(x.cols() == w.cols(), ErrorCode::kDimensionMismatch,
          "matmul_transposed shapes");
  Matrix out(x.rows(), w.rows());
  const auto& k = simd::active_kernels();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < w.rows(); ++c) {
      out(r, c) = k.dot(x.row(r).data(), w.row(c).data(), x.cols());
    }
  }
  return out;
}

void accumulate_xt_dy(Matrix& acc, const Matrix& x, const Matrix& dy) {
  require(acc.rows() == x.cols() && acc.cols() == dy.cols() &&
              x.rows() == dy.rows(),
          ErrorCode::kDimensionMismatch, "accumulate_xt_dy shapes");
  const auto& k = simd::active_kernels();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* g = dy.row(r).data();
    for (std::size_t i = 0; i < x.cols(); ++i) {
      const double coeff = x(r, i);
      if (coeff != 0.0) k.axpy(coeff, g, acc.row(i).data(), dy.cols());
    }
  }
}

void add_row_bias(Matrix& x, std::span<const double> bias) {
  require(bias.size() == x.cols(), ErrorCode::kDimensionMismatch, "bias width");
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
}

void accumulate_column_sums(std::span<double> acc, const Matrix& dy) {
  require(acc.size() == dy.cols(), ErrorCode::kDimensionMismatch, "bias grad width");
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto row = dy.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) acc[c] += row[c];
  }
}

double l2_norm(std::span<const double> v) {
  return std::sqrt(simd::dot(v, v));
}

double rms(const Matrix& m) {
  if (m.empty()) return 0.0;
  return std::sqrt(simd::dot(m.flat(), m.flat()) / static_cast<double>(m.size()));
}

}  // namespace latentforge
