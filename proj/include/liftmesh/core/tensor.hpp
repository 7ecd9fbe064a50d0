/*
 * Copyright 2026 The liftmesh Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "liftmesh/core/error.hpp"

namespace liftmesh {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  os << ']';
  return os.str();
}

/// Dense row-major array of doubles. Rank 0 is not used; scalars are [1].
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape dims, double fill = 0.0) : dims_(std::move(dims)), data_(element_count(dims_), fill) {
    check_dims();
  }

  Tensor(Shape dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims();
    require(data_.size() == element_count(dims_),
            "tensor data length " + std::to_string(data_.size()) + " does not match dims " + to_string(dims_));
  }

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      require(row.size() == c, "ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  const Shape& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t dim(std::size_t axis) const {
    require(axis < dims_.size(), "axis out of range");
    return dims_[axis];
  }
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }

  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * dims_[1], dims_[1]); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * dims_[1], dims_[1]);
  }

  Tensor reshaped(Shape dims) const {
    require(element_count(dims) == data_.size(), "reshape " + to_string(dims_) + " -> " + to_string(dims));
    return Tensor(std::move(dims), data_);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  Tensor& operator+=(const Tensor& o) {
    require(o.dims_ == dims_, "+= dims " + to_string(dims_) + " vs " + to_string(o.dims_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.dims_ == b.dims_ && a.data_ == b.data_; }

 private:
  void check_dims() const {
    for (std::size_t d : dims_) require(d > 0, "tensor dims must be positive, got " + to_string(dims_));
  }

  Shape dims_;
  std::vector<double> data_;
};

inline void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  require(t.rank() == rank, std::string(what) + ": expected rank " + std::to_string(rank) + ", got " + to_string(t.dims()));
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  require(a.dims() == b.dims(), "max_abs_diff dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace kernels {

// c += op(a) * op(b), where op transposes when the flag is set. All rank-2.
inline void gemm_acc(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c) {
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  require(k == kb, "matmul inner dims " + to_string(a.dims()) + " * " + to_string(b.dims()));
  require(c.rank() == 2 && c.rows() == m && c.cols() == n, "matmul output dims");
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  const std::size_t lda = a.cols();
  const std::size_t ldb = b.cols();
  if (!trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = pc + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = trans_a ? pa[p * lda + i] : pa[i * lda + p];
        if (av == 0.0) continue;
        const double* brow = pb + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = pb + j * ldb;
        double s = 0.0;
        if (!trans_a) {
          const double* arow = pa + i * lda;
          for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        } else {
          for (std::size_t p = 0; p < k; ++p) s += pa[p * lda + i] * brow[p];
        }
        crow[j] += s;
      }
    }
  }
}

}  // namespace kernels

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  Tensor c({a.rows(), b.cols()});
  kernels::gemm_acc(a, false, b, false, c);
  return c;
}

inline Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

}  // namespace liftmesh
