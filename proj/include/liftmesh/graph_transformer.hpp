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
#include <cstddef>
#include <string>
#include <vector>

#include "liftmesh/core/ops.hpp"
#include "liftmesh/core/rng.hpp"

namespace liftmesh {

// Glorot-uniform weight matrix.
inline Tensor glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out, double gain = 1.0) {
  const double a = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return rng.uniform_tensor({fan_in, fan_out}, -a, a);
}

/// Weights of one graph-transformer block: a GCN layer followed by
/// multi-head self-attention and a feed-forward layer, each of the latter
/// two with a residual connection and layer norm.
struct GtBlockParams {
  std::size_t heads = 1;
  std::size_t head_dim = 1;
  Tensor gcn_weight;                      // D_in x D
  std::vector<Tensor> query, key, value;  // per head, D x d_k
  Tensor out_proj;                        // (h * d_k) x D
  Tensor ff1_weight, ff1_bias;            // D x D_ff, D_ff
  Tensor ff2_weight, ff2_bias;            // D_ff x D, D
  Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;

  std::size_t in_dim() const { return gcn_weight.rows(); }
  std::size_t dim() const { return gcn_weight.cols(); }

  template <class F>
  void visit(const std::string& prefix, F&& f) { visit_fields(*this, prefix, f); }
  template <class F>
  void visit(const std::string& prefix, F&& f) const { visit_fields(*this, prefix, f); }

 private:
  template <class Self, class F>
  static void visit_fields(Self& self, const std::string& p, F& f) {
    f(p + "gcn_weight", self.gcn_weight);
    for (std::size_t h = 0; h < self.query.size(); ++h) {
      f(p + "q" + std::to_string(h), self.query[h]);
      f(p + "k" + std::to_string(h), self.key[h]);
      f(p + "v" + std::to_string(h), self.value[h]);
    }
    f(p + "w_out", self.out_proj);
    f(p + "ff1_w", self.ff1_weight);
    f(p + "ff1_b", self.ff1_bias);
    f(p + "ff2_w", self.ff2_weight);
    f(p + "ff2_b", self.ff2_bias);
    f(p + "ln1_g", self.ln1_gain);
    f(p + "ln1_b", self.ln1_bias);
    f(p + "ln2_g", self.ln2_gain);
    f(p + "ln2_b", self.ln2_bias);
  }
};

/// Allocates a block; with rng == nullptr every tensor is zero, otherwise
/// weights are Glorot-uniform, gains one and biases zero.
inline GtBlockParams make_gt_block(std::size_t in_dim, std::size_t dim, std::size_t heads, std::size_t ff_dim,
                                   Rng* rng) {
  if (heads == 0 || dim % heads != 0)
    throw ConfigError("block dim " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) + " heads");
  GtBlockParams p;
  p.heads = heads;
  p.head_dim = dim / heads;
  auto w = [&](std::size_t r, std::size_t c) { return rng ? glorot(*rng, r, c) : Tensor({r, c}); };
  p.gcn_weight = w(in_dim, dim);
  for (std::size_t h = 0; h < heads; ++h) {
    p.query.push_back(w(dim, p.head_dim));
    p.key.push_back(w(dim, p.head_dim));
    p.value.push_back(w(dim, p.head_dim));
  }
  p.out_proj = w(heads * p.head_dim, dim);
  p.ff1_weight = w(dim, ff_dim);
  p.ff1_bias = Tensor({ff_dim});
  p.ff2_weight = w(ff_dim, dim);
  p.ff2_bias = Tensor({dim});
  const double g = rng ? 1.0 : 0.0;
  p.ln1_gain = Tensor({dim}, g);
  p.ln1_bias = Tensor({dim});
  p.ln2_gain = Tensor({dim}, g);
  p.ln2_bias = Tensor({dim});
  return p;
}

inline void validate(const GtBlockParams& p) {
  require(p.heads >= 1 && p.query.size() == p.heads && p.key.size() == p.heads && p.value.size() == p.heads,
          "block head count does not match projection lists");
  require(p.heads * p.head_dim == p.dim(), "heads * head_dim must equal the block dim");
  require(p.out_proj.rows() == p.heads * p.head_dim && p.out_proj.cols() == p.dim(), "w_out dims");
}

namespace ad {

/// GELU(A_hat X W).
inline Var gcn_layer(Var x, Var adjacency, Var weight) {
  require(adjacency.value().rank() == 2 && adjacency.value().rows() == adjacency.value().cols() &&
              adjacency.value().cols() == x.value().rows(),
          "gcn_layer: adjacency " + to_string(adjacency.dims()) + " does not match features " + to_string(x.dims()));
  require(x.value().cols() == weight.value().rows(),
          "gcn_layer: features " + to_string(x.dims()) + " do not match weight " + to_string(weight.dims()));
  return gelu(matmul(matmul(adjacency, x), weight));
}

/// softmax(Q K^T / sqrt(d)) V.
inline Var scaled_dot_attention(Var q, Var k, Var v) {
  require(q.value().rank() == 2 && q.dims() == k.dims() && k.value().rows() == v.value().rows(),
          "scaled_dot_attention dims q" + to_string(q.dims()) + " k" + to_string(k.dims()) + " v" + to_string(v.dims()));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.value().cols()));
  return matmul(softmax_rows(scale(matmul_nt(q, k), inv_sqrt_d)), v);
}

/// Concat(H_1..H_h) W_out with H_i = Attention(x Q_i, x K_i, x V_i).
inline Var multi_head_self_attention(Var x, const GtBlockParams& p, Binder& bind) {
  validate(p);
  require(x.value().rank() == 2 && x.value().cols() == p.dim(),
          "multi_head_self_attention: input " + to_string(x.dims()) + " vs block dim " + std::to_string(p.dim()));
  std::vector<Var> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h)
    heads.push_back(
        scaled_dot_attention(matmul(x, bind(p.query[h])), matmul(x, bind(p.key[h])), matmul(x, bind(p.value[h]))));
  Var cat = heads.size() == 1 ? heads[0] : concat_cols(std::span<const Var>(heads));
  return matmul(cat, bind(p.out_proj));
}

inline Var feed_forward(Var x, const GtBlockParams& p, Binder& bind) {
  Var h = gelu(add_row_bias(matmul(x, bind(p.ff1_weight)), bind(p.ff1_bias)));
  return add_row_bias(matmul(h, bind(p.ff2_weight)), bind(p.ff2_bias));
}

inline Var gt_block_forward(Var x, Var adjacency, const GtBlockParams& p, Binder& bind) {
  Var y1 = gcn_layer(x, adjacency, bind(p.gcn_weight));
  Var y2 = layer_norm(y1 + multi_head_self_attention(y1, p, bind), bind(p.ln1_gain), bind(p.ln1_bias));
  return layer_norm(y2 + feed_forward(y2, p, bind), bind(p.ln2_gain), bind(p.ln2_bias));
}

inline Var gt_stack_forward(Var x, Var adjacency, const std::vector<GtBlockParams>& blocks, Binder& bind) {
  for (const GtBlockParams& b : blocks) x = gt_block_forward(x, adjacency, b, bind);
  return x;
}

}  // namespace ad

/// One parallel branch: a split projection D -> D/B and its block stack.
struct BranchParams {
  Tensor split;  // D x D/B
  std::vector<GtBlockParams> blocks;

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "split", split);
    for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k].visit(prefix + std::to_string(k) + ".", f);
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) const {
    f(prefix + "split", split);
    for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k].visit(prefix + std::to_string(k) + ".", f);
  }
};

struct ParallelConfig {
  std::size_t dim = 32;
  std::size_t branches = 4;
  std::size_t blocks = 2;
  std::size_t heads = 2;
  std::size_t ff_mult = 2;

  std::size_t branch_dim() const { return dim / branches; }
};

inline void validate(const ParallelConfig& c) {
  if (c.branches == 0 || c.dim % c.branches != 0)
    throw ConfigError(std::to_string(c.branches) + " branches do not divide dim " + std::to_string(c.dim));
  if (c.heads == 0 || c.branch_dim() % c.heads != 0)
    throw ConfigError("branch dim " + std::to_string(c.branch_dim()) + " is not divisible by " +
                      std::to_string(c.heads) + " heads");
  if (c.blocks == 0 || c.ff_mult == 0) throw ConfigError("blocks and ff_mult must be >= 1");
}

inline std::vector<BranchParams> make_parallel_branches(const ParallelConfig& c, Rng* rng) {
  validate(c);
  const std::size_t bd = c.branch_dim();
  std::vector<BranchParams> out(c.branches);
  for (BranchParams& b : out) {
    b.split = rng ? glorot(*rng, c.dim, bd) : Tensor({c.dim, bd});
    for (std::size_t k = 0; k < c.blocks; ++k) b.blocks.push_back(make_gt_block(bd, bd, c.heads, bd * c.ff_mult, rng));
  }
  return out;
}

namespace ad {

/// Projects x into each branch, runs the branch stacks and concatenates the
/// branch outputs along features.
inline Var parallel_fuse(Var x, Var adjacency, const std::vector<BranchParams>& branches, Binder& bind) {
  require(!branches.empty(), "parallel_fuse needs at least one branch");
  const std::size_t d = x.value().cols();
  if (d % branches.size() != 0)
    throw ConfigError(std::to_string(branches.size()) + " branches do not divide dim " + std::to_string(d));
  std::vector<Var> outs;
  outs.reserve(branches.size());
  for (const BranchParams& b : branches) {
    require(b.split.rank() == 2 && b.split.rows() == d && b.split.cols() == d / branches.size(),
            "branch split projection dims " + to_string(b.split.dims()));
    outs.push_back(gt_stack_forward(matmul(x, bind(b.split)), adjacency, b.blocks, bind));
  }
  return outs.size() == 1 ? outs[0] : concat_cols(std::span<const Var>(outs));
}

}  // namespace ad

// Plain-tensor entry points.
inline Tensor gcn_layer(const Tensor& x, const Tensor& adjacency, const Tensor& weight) {
  ad::Tape t(false);
  return ad::gcn_layer(t.constant(x), t.constant(adjacency), t.constant(weight)).value();
}

inline Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  ad::Tape t(false);
  return ad::scaled_dot_attention(t.constant(q), t.constant(k), t.constant(v)).value();
}

inline Tensor multi_head_self_attention(const Tensor& x, const GtBlockParams& p) {
  ad::Tape t(false);
  ad::Binder b(t, false);
  return ad::multi_head_self_attention(t.constant(x), p, b).value();
}

inline Tensor gt_block_forward(const Tensor& x, const Tensor& adjacency, const GtBlockParams& p) {
  ad::Tape t(false);
  ad::Binder b(t, false);
  return ad::gt_block_forward(t.constant(x), t.constant(adjacency), p, b).value();
}

inline Tensor parallel_fuse(const Tensor& x, const Tensor& adjacency, const std::vector<BranchParams>& branches) {
  ad::Tape t(false);
  ad::Binder b(t, false);
  return ad::parallel_fuse(t.constant(x), t.constant(adjacency), branches, b).value();
}

}  // namespace liftmesh
