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

#include <cstddef>
#include <string>
#include <vector>

#include "liftmesh/body_model.hpp"
#include "liftmesh/camera.hpp"
#include "liftmesh/graph_transformer.hpp"
#include "liftmesh/lifter.hpp"

namespace liftmesh {

// What the pose branch consumes: lifter features F (end-to-end) or the
// lifted joints P (trained as a separate module).
enum class PoseSource { features, joints };

inline std::string to_string(PoseSource s) { return s == PoseSource::features ? "features" : "joints"; }

inline PoseSource parse_pose_source(const std::string& s) {
  if (s == "features") return PoseSource::features;
  if (s == "joints") return PoseSource::joints;
  throw ConfigError("unknown pose source '" + s + "' (expected features|joints)");
}

struct PseConfig {
  std::size_t dim = 32;
  std::size_t blocks = 1;
  std::size_t heads = 2;
  std::size_t ff_mult = 2;
  std::size_t tokens = 16;
  std::size_t iterations = 3;
  std::size_t hidden = 256;
  PoseSource source = PoseSource::features;
  bool tie_branch_weights = false;
};

struct PseParams {
  PseConfig config;
  std::size_t joints = 0;
  Tensor adapter_w, adapter_b;  // (D_lifter or 3) x D, D
  Tensor pose_pos_embed;        // J x D
  std::vector<std::size_t> template_indices;  // T vertex ids into the mean mesh
  Tensor template_proj;                       // 3 x D
  std::vector<GtBlockParams> pose_blocks;
  std::vector<GtBlockParams> template_blocks;  // empty when tied
  Tensor reg_w0, reg_b0, reg_w1, reg_b1, reg_w2, reg_b2;

  std::size_t input_dim() const { return adapter_w.rows(); }
  std::size_t dim() const { return config.dim; }

  const std::vector<GtBlockParams>& template_stack() const {
    return config.tie_branch_weights ? pose_blocks : template_blocks;
  }

  template <class F>
  void visit(F&& f) { visit_fields(*this, f); }
  template <class F>
  void visit(F&& f) const { visit_fields(*this, f); }

 private:
  template <class Self, class F>
  static void visit_fields(Self& self, F& f) {
    f("pse.adapter.w", self.adapter_w);
    f("pse.adapter.b", self.adapter_b);
    f("pse.adapter.pos_embed", self.pose_pos_embed);
    f("pse.template.proj", self.template_proj);
    const std::string pose_prefix = self.config.tie_branch_weights ? "pse.gt.shared." : "pse.gt.pose.";
    for (std::size_t k = 0; k < self.pose_blocks.size(); ++k) self.pose_blocks[k].visit(pose_prefix + std::to_string(k) + ".", f);
    for (std::size_t k = 0; k < self.template_blocks.size(); ++k)
      self.template_blocks[k].visit("pse.gt.template." + std::to_string(k) + ".", f);
    f("pse.reg.w0", self.reg_w0);
    f("pse.reg.b0", self.reg_b0);
    f("pse.reg.w1", self.reg_w1);
    f("pse.reg.b1", self.reg_b1);
    f("pse.reg.w2", self.reg_w2);
    f("pse.reg.b2", self.reg_b2);
  }
};

// T indices at uniform stride over V vertices.
inline std::vector<std::size_t> uniform_subsample(std::size_t vertices, std::size_t tokens) {
  require(tokens >= 1 && tokens <= vertices, "template token count must be in [1, V]");
  std::vector<std::size_t> idx(tokens);
  for (std::size_t i = 0; i < tokens; ++i) idx[i] = i * vertices / tokens;
  return idx;
}

/// rng == nullptr gives all-zero parameters.
inline PseParams make_pse(const PseConfig& c, std::size_t joints, std::size_t lifter_dim, std::size_t vertices, Rng* rng) {
  if (c.iterations == 0) throw ConfigError("pse iterations must be >= 1");
  if (c.blocks == 0 || c.hidden == 0 || c.ff_mult == 0) throw ConfigError("pse blocks, hidden and ff_mult must be >= 1");
  PseParams p;
  p.config = c;
  p.joints = joints;
  const std::size_t d = c.dim;
  const std::size_t in = c.source == PoseSource::features ? lifter_dim : 3;
  auto w = [&](std::size_t r, std::size_t col, double gain = 1.0) {
    return rng ? glorot(*rng, r, col, gain) : Tensor({r, col});
  };
  p.adapter_w = w(in, d);
  p.adapter_b = Tensor({d});
  p.pose_pos_embed = rng ? rng->uniform_tensor({joints, d}, -0.1, 0.1) : Tensor({joints, d});
  p.template_indices = uniform_subsample(vertices, c.tokens);
  p.template_proj = w(3, d);
  for (std::size_t k = 0; k < c.blocks; ++k) p.pose_blocks.push_back(make_gt_block(d, d, c.heads, d * c.ff_mult, rng));
  if (!c.tie_branch_weights)
    for (std::size_t k = 0; k < c.blocks; ++k)
      p.template_blocks.push_back(make_gt_block(d, d, c.heads, d * c.ff_mult, rng));
  p.reg_w0 = w(d + kPoseParams, c.hidden);
  p.reg_b0 = Tensor({c.hidden});
  p.reg_w1 = w(c.hidden, c.hidden);
  p.reg_b1 = Tensor({c.hidden});
  p.reg_w2 = w(c.hidden, kPoseParams, 0.01);
  p.reg_b2 = Tensor({kPoseParams});
  return p;
}

struct RegressionTrace {
  std::vector<Tensor> thetas;  // iterations + 1 entries of 24 x 3, thetas[0] = 0

  const Tensor& final_theta() const { return thetas.back(); }
};

namespace ad {

struct PseInput {
  PoseSource source;
  Var data;  // J x D_lifter features or J x 3 joints
};

/// Selects T mean-mesh vertices and projects each to D dims.
inline Var template_tokens(Tape& tape, const BodyModel& m, const PseParams& p, Binder& bind) {
  for (std::size_t i : p.template_indices)
    require(i < m.vertex_count(), "template index " + std::to_string(i) + " out of range for V=" + std::to_string(m.vertex_count()));
  Var verts = gather_rows(tape.constant(m.template_vertices), p.template_indices);
  return matmul(verts, bind(p.template_proj));
}

/// Pose branch and template branch through their transformer stacks,
/// concatenated by rows: (J + T) x D. Attention spans each whole branch;
/// the GCN adjacency is self-loops only.
inline Var pse_forward(const PseInput& input, const BodyModel& m, const PseParams& p, Binder& bind) {
  if (input.source != p.config.source)
    throw ConfigError("pose-shape estimator configured for " + to_string(p.config.source) + " input, got " +
                      to_string(input.source));
  const Tensor& iv = input.data.value();
  require(iv.rank() == 2 && iv.rows() == p.joints && iv.cols() == p.input_dim(),
          "pse_forward: pose input " + to_string(iv.dims()) + " vs expected " + std::to_string(p.joints) + "x" +
              std::to_string(p.input_dim()));
  Tape& tape = input.data.tape();
  Var pose = add_row_bias(matmul(input.data, bind(p.adapter_w)), bind(p.adapter_b)) + bind(p.pose_pos_embed);
  Var pose_out = gt_stack_forward(pose, tape.constant(self_loop_adjacency(p.joints)), p.pose_blocks, bind);
  Var tmpl = template_tokens(tape, m, p, bind);
  Var tmpl_out = gt_stack_forward(tmpl, tape.constant(self_loop_adjacency(p.template_indices.size())),
                                  p.template_stack(), bind);
  return concat_rows({pose_out, tmpl_out});
}

/// theta_0 = 0; theta_i = theta_{i-1} + MLP([mean_rows(fused), theta_{i-1}]).
/// Returns all iterates as 1 x 72 rows.
inline std::vector<Var> iterative_regress(Var fused, const PseParams& p, Binder& bind) {
  require(fused.value().rank() == 2 && fused.value().cols() == p.dim(),
          "iterative_regress: fused features " + to_string(fused.dims()) + " vs dim " + std::to_string(p.dim()));
  Tape& tape = fused.tape();
  Var pooled = mean_rows(fused);
  std::vector<Var> thetas{tape.constant(Tensor({1, kPoseParams}))};
  for (std::size_t i = 0; i < p.config.iterations; ++i) {
    Var x = concat_cols({pooled, thetas.back()});
    Var h0 = gelu(add_row_bias(matmul(x, bind(p.reg_w0)), bind(p.reg_b0)));
    Var h1 = gelu(add_row_bias(matmul(h0, bind(p.reg_w1)), bind(p.reg_b1)));
    Var delta = add_row_bias(matmul(h1, bind(p.reg_w2)), bind(p.reg_b2));
    thetas.push_back(thetas.back() + delta);
  }
  return thetas;
}

struct PipelineVars {
  LifterVars lifter;
  Var fused;
  std::vector<Var> thetas;
  PosedVars mesh;

  Var theta() const { return thetas.back(); }
};

inline PipelineVars full_pipeline(Var pose, const LifterParams& lifter, const PseParams& pse, const BodyModel& m,
                                  Binder& lifter_bind, Binder& pse_bind) {
  PipelineVars out;
  out.lifter = lifter_forward(pose, lifter, lifter_bind);
  const Var source = pse.config.source == PoseSource::features ? out.lifter.features : out.lifter.joints3d;
  out.fused = pse_forward({pse.config.source, source}, m, pse, pse_bind);
  out.thetas = iterative_regress(out.fused, pse, pse_bind);
  out.mesh = forward_kinematics_lbs(m, out.theta(), out.lifter.shape);
  return out;
}

}  // namespace ad

inline Tensor template_tokens(const BodyModel& m, const PseParams& p) {
  ad::Tape t(false);
  ad::Binder b(t, false);
  return ad::template_tokens(t, m, p, b).value();
}

inline Tensor pse_forward(PoseSource source, const Tensor& pose_input, const BodyModel& m, const PseParams& p) {
  ad::Tape t(false);
  ad::Binder b(t, false);
  return ad::pse_forward({source, t.constant(pose_input)}, m, p, b).value();
}

inline RegressionTrace iterative_regress(const Tensor& fused, const PseParams& p) {
  ad::Tape t(false);
  ad::Binder b(t, false);
  RegressionTrace trace;
  for (const ad::Var& th : ad::iterative_regress(t.constant(fused), p, b))
    trace.thetas.push_back(th.value().reshaped({kBodyJoints, 3}));
  return trace;
}

/// Final output of the pipeline with the intermediate parameters that
/// produced it.
struct MeshResult {
  Tensor vertices;  // V x 3, meters
  Tensor joints;    // 24 x 3 posed body joints
  Tensor theta;     // 24 x 3 axis-angle
  Tensor beta;      // 10
  Tensor camera;    // (s, tx, ty)
  Tensor joints3d;  // lifted P, J x 3
};

inline MeshResult full_pipeline(const Pose2D& pose, const LifterParams& lifter, const PseParams& pse, const BodyModel& m) {
  ad::Tape t(false);
  ad::Binder lb(t, false), pb(t, false);
  const auto v = ad::full_pipeline(t.constant(pose.coords), lifter, pse, m, lb, pb);
  return {v.mesh.vertices.value(), v.mesh.joints.value(), v.theta().value().reshaped({kBodyJoints, 3}),
          v.lifter.shape.value(), v.lifter.camera.value(), v.lifter.joints3d.value()};
}

}  // namespace liftmesh
