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

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "liftmesh/core/tape.hpp"

// Differentiable tensor operations recorded on an ad::Tape. Everything is
// rank-2 unless noted; rank-1 tensors are accepted where a bias or a flat
// vector is natural.
namespace liftmesh::ad {

namespace detail {

inline const Tensor& as_matrix_check(const Var& v, const char* what) {
  require_rank(v.value(), 2, what);
  return v.value();
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  const Tensor& av = detail::as_matrix_check(a, "matmul lhs");
  const Tensor& bv = detail::as_matrix_check(b, "matmul rhs");
  require(av.cols() == bv.rows(), "matmul dims " + to_string(av.dims()) + " * " + to_string(bv.dims()));
  Tensor out({av.rows(), bv.cols()});
  kernels::gemm_acc(av, false, bv, false, out);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) kernels::gemm_acc(g, false, b.value(), true, t.grad_buffer(a));
    if (t.requires_grad(b)) kernels::gemm_acc(a.value(), true, g, false, t.grad_buffer(b));
  });
}

// a * b^T
inline Var matmul_nt(Var a, Var b) {
  const Tensor& av = detail::as_matrix_check(a, "matmul_nt lhs");
  const Tensor& bv = detail::as_matrix_check(b, "matmul_nt rhs");
  require(av.cols() == bv.cols(), "matmul_nt dims " + to_string(av.dims()) + " * " + to_string(bv.dims()) + "^T");
  Tensor out({av.rows(), bv.rows()});
  kernels::gemm_acc(av, false, bv, true, out);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) kernels::gemm_acc(g, false, b.value(), false, t.grad_buffer(a));
    if (t.requires_grad(b)) kernels::gemm_acc(g, true, a.value(), false, t.grad_buffer(b));
  });
}

inline Var transpose(Var a) {
  return a.tape().record(liftmesh::transpose(detail::as_matrix_check(a, "transpose")), {a},
                         [a](Tape& t, const Tensor& g) { t.grad_buffer(a) += liftmesh::transpose(g); });
}

inline Var add(Var a, Var b) {
  require(a.dims() == b.dims(), "add dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  Tensor out = a.value();
  out += b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(Var a, Var b) {
  require(a.dims() == b.dims(), "sub dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

// Elementwise product.
inline Var mul(Var a, Var b) {
  require(a.dims() == b.dims(), "mul dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

inline Var scale(Var a, double c) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= c;
  return a.tape().record(std::move(out), {a}, [a, c](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

// x (N x D) + bias broadcast over rows; bias is [D] or [1 x D].
inline Var add_row_bias(Var x, Var bias) {
  const Tensor& xv = detail::as_matrix_check(x, "add_row_bias");
  const std::size_t d = xv.cols();
  require(bias.size() == d, "bias length " + std::to_string(bias.size()) + " vs feature dim " + std::to_string(d));
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) += bias.value()[c];
  return x.tape().record(std::move(out), {x, bias}, [x, bias, d](Tape& t, const Tensor& g) {
    t.accumulate(x, g);
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad_buffer(bias);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < d; ++c) gb[c] += g(r, c);
    }
  });
}

namespace detail {
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;
}  // namespace detail

// Tanh-approximated GELU.
inline double gelu(double x) {
  const double u = detail::kGeluC * (x + detail::kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_derivative(double x) {
  const double u = detail::kGeluC * (x + detail::kGeluA * x * x * x);
  const double th = std::tanh(u);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * detail::kGeluC * (1.0 + 3.0 * detail::kGeluA * x * x);
}

inline Var gelu(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = gelu(v);
  return x.tape().record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * gelu_derivative(xv[i]);
  });
}

inline Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  Tensor out(x.dims());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    double m = in[0];
    for (double v : in) m = std::max(m, v);
    double s = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) s += (o[c] = std::exp(in[c] - m));
    for (double& v : o) v /= s;
  }
  return out;
}

inline Var softmax_rows(Var x) {
  Tensor out = softmax_rows(x.value());
  Tensor saved = x.tape().requires_grad(x) ? out : Tensor{};
  return x.tape().record(std::move(out), {x}, [x, y = std::move(saved)](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    const std::size_t cols = y.cols();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < cols; ++c) gx(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

// Row-wise normalisation (population variance, eps inside the sqrt) followed
// by a per-feature affine map.
inline Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
  const Tensor& xv = detail::as_matrix_check(x, "layer_norm");
  const std::size_t n = xv.rows(), d = xv.cols();
  require(gain.size() == d && bias.size() == d, "layer_norm gain/bias length must equal feature dim");
  Tensor xhat(xv.dims());
  std::vector<double> inv_std(n);
  for (std::size_t r = 0; r < n; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xv(r, c);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xv(r, c) - mean) * (xv(r, c) - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) xhat(r, c) = (xv(r, c) - mean) * inv_std[r];
  }
  Tensor out(xv.dims());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) = xhat(r, c) * gain.value()[c] + bias.value()[c];
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), n, d](Tape& t, const Tensor& g) {
        if (t.requires_grad(gain)) {
          Tensor& gg = t.grad_buffer(gain);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) gg[c] += g(r, c) * xhat(r, c);
        }
        if (t.requires_grad(bias)) {
          Tensor& gb = t.grad_buffer(bias);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) gb[c] += g(r, c);
        }
        if (t.requires_grad(x)) {
          Tensor& gx = t.grad_buffer(x);
          std::vector<double> dxhat(d);
          for (std::size_t r = 0; r < n; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              dxhat[c] = g(r, c) * gain.value()[c];
              m1 += dxhat[c];
              m2 += dxhat[c] * xhat(r, c);
            }
            m1 /= static_cast<double>(d);
            m2 /= static_cast<double>(d);
            for (std::size_t c = 0; c < d; ++c) gx(r, c) += inv_std[r] * (dxhat[c] - m1 - xhat(r, c) * m2);
          }
        }
      });
}

inline Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols of nothing");
  const std::size_t rows = detail::as_matrix_check(parts[0], "concat_cols").rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require(detail::as_matrix_check(p, "concat_cols").rows() == rows, "concat_cols row mismatch");
    cols += p.value().cols();
  }
  Tensor out({rows, cols});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pv.cols(); ++c) out(r, off + c) = pv(r, c);
    off += pv.cols();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [ins, rows](Tape& t, const Tensor& g) {
    std::size_t off = 0;
    for (const Var& p : ins) {
      const std::size_t pc = p.value().cols();
      if (t.requires_grad(p)) {
        Tensor& gp = t.grad_buffer(p);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < pc; ++c) gp(r, c) += g(r, off + c);
      }
      off += pc;
    }
  });
}

inline Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const std::size_t cols = detail::as_matrix_check(parts[0], "concat_rows").cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require(detail::as_matrix_check(p, "concat_rows").cols() == cols, "concat_rows column mismatch");
    rows += p.value().rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const Var& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts[0].tape().record(Tensor({rows, cols}, std::move(data)), parts, [ins](Tape& t, const Tensor& g) {
    std::size_t off = 0;
    for (const Var& p : ins) {
      const std::size_t n = p.size();
      if (t.requires_grad(p)) {
        Tensor& gp = t.grad_buffer(p);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
      }
      off += n;
    }
  });
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}
inline Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = detail::as_matrix_check(x, "slice_cols");
  require(count > 0 && begin + count <= xv.cols(), "slice_cols range out of bounds");
  Tensor out({xv.rows(), count});
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = xv(r, begin + c);
  return x.tape().record(std::move(out), {x}, [x, begin, count](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) gx(r, begin + c) += g(r, c);
  });
}

inline Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = detail::as_matrix_check(x, "slice_rows");
  require(count > 0 && begin + count <= xv.rows(), "slice_rows range out of bounds");
  const std::size_t cols = xv.cols();
  std::vector<double> data(xv.data().begin() + begin * cols, xv.data().begin() + (begin + count) * cols);
  return x.tape().record(Tensor({count, cols}, std::move(data)), {x}, [x, begin, cols](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * cols + i] += g[i];
  });
}

inline Var gather_rows(Var x, std::vector<std::size_t> indices) {
  const Tensor& xv = detail::as_matrix_check(x, "gather_rows");
  require(!indices.empty(), "gather_rows with no indices");
  const std::size_t cols = xv.cols();
  Tensor out({indices.size(), cols});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < xv.rows(), "gather_rows index " + std::to_string(indices[i]) + " out of range");
    for (std::size_t c = 0; c < cols; ++c) out(i, c) = xv(indices[i], c);
  }
  return x.tape().record(std::move(out), {x}, [x, indices = std::move(indices), cols](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < indices.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) gx(indices[i], c) += g(i, c);
  });
}

// N x D -> 1 x D.
inline Var mean_rows(Var x) {
  const Tensor& xv = detail::as_matrix_check(x, "mean_rows");
  const std::size_t n = xv.rows(), d = xv.cols();
  Tensor out({1, d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[c] += xv(r, c);
  for (double& v : out.data()) v /= static_cast<double>(n);
  return x.tape().record(std::move(out), {x}, [x, n, d](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) gx(r, c) += g[c] * inv;
  });
}

inline Var reshape(Var x, Shape dims) {
  return x.tape().record(x.value().reshaped(std::move(dims)), {x}, [x](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().record(Tensor::scalar(s), {x}, [x](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (double& v : gx.data()) v += g[0];
  });
}

// sum(x * w) for a constant weight tensor of matching size.
inline Var weighted_sum(Var x, Tensor w) {
  require(w.size() == x.size(), "weighted_sum size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += x.value()[i] * w[i];
  return x.tape().record(Tensor::scalar(s), {x}, [x, w = std::move(w)](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < w.size(); ++i) gx[i] += g[0] * w[i];
  });
}

// mean |x|; the subgradient at 0 is 0.
inline Var mean_abs(Var x) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (double v : x.value().data()) s += std::abs(v);
  return x.tape().record(Tensor::scalar(s / static_cast<double>(n)), {x}, [x, n](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    const double k = g[0] / static_cast<double>(n);
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < n; ++i) gx[i] += xv[i] > 0.0 ? k : (xv[i] < 0.0 ? -k : 0.0);
  });
}

inline Var mean_square(Var x) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (double v : x.value().data()) s += v * v;
  return x.tape().record(Tensor::scalar(s / static_cast<double>(n)), {x}, [x, n](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    const double k = 2.0 * g[0] / static_cast<double>(n);
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < n; ++i) gx[i] += k * xv[i];
  });
}

// Per-row affine map: rows of `blend` are [R (3x3 row-major) | b (3)], and
// out_v = R_v * p_v + b_v. Used by linear blend skinning.
inline Var affine_rows(Var blend, Var points) {
  const Tensor& bv = detail::as_matrix_check(blend, "affine_rows blend");
  const Tensor& pv = detail::as_matrix_check(points, "affine_rows points");
  require(bv.cols() == 12 && pv.cols() == 3 && bv.rows() == pv.rows(), "affine_rows expects Nx12 and Nx3");
  const std::size_t n = pv.rows();
  Tensor out({n, 3});
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t r = 0; r < 3; ++r) {
      double s = bv(v, 9 + r);
      for (std::size_t c = 0; c < 3; ++c) s += bv(v, 3 * r + c) * pv(v, c);
      out(v, r) = s;
    }
  return blend.tape().record(std::move(out), {blend, points}, [blend, points, n](Tape& t, const Tensor& g) {
    const Tensor& bv = blend.value();
    const Tensor& pv = points.value();
    if (t.requires_grad(blend)) {
      Tensor& gb = t.grad_buffer(blend);
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t r = 0; r < 3; ++r) {
          gb(v, 9 + r) += g(v, r);
          for (std::size_t c = 0; c < 3; ++c) gb(v, 3 * r + c) += g(v, r) * pv(v, c);
        }
    }
    if (t.requires_grad(points)) {
      Tensor& gp = t.grad_buffer(points);
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t c = 0; c < 3; ++c) {
          double s = 0.0;
          for (std::size_t r = 0; r < 3; ++r) s += g(v, r) * bv(v, 3 * r + c);
          gp(v, c) += s;
        }
    }
  });
}

}  // namespace liftmesh::ad

namespace liftmesh {

// Plain-tensor forms of the elementwise / row-wise ops.
inline Tensor gelu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = ad::gelu(v);
  return out;
}

using ad::softmax_rows;

inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5) {
  ad::Tape tape(false);
  return ad::layer_norm(tape.constant(x), tape.constant(gain), tape.constant(bias), eps).value();
}

}  // namespace liftmesh
