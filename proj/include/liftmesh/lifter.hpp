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

#include "liftmesh/graph_transformer.hpp"
#include "liftmesh/skeleton.hpp"

namespace liftmesh {

inline constexpr std::size_t kShapeCoeffs = 10;
inline constexpr std::size_t kCameraParams = 3;

struct LifterConfig {
  ParallelConfig trunk;  // dim D, branches B, blocks per branch, heads, ff multiplier
};

/// Learnable weights of the pose analysis module, plus the skeleton it
/// was built for.
struct LifterParams {
  LifterConfig config;
  SkeletonTopology topology;
  Tensor adjacency;  // derived from topology, not learned
  Tensor input_proj;  // 2 x D, shared across joints
  Tensor pos_embed;   // J x D
  std::vector<BranchParams> branches;
  Tensor pose_head_w, pose_head_b;      // D x 3, 3
  Tensor shape_head_w, shape_head_b;    // D x 10, 10
  Tensor camera_head_w, camera_head_b;  // D x 3, 3

  std::size_t joints() const { return topology.joint_count(); }
  std::size_t dim() const { return config.trunk.dim; }

  template <class F>
  void visit(F&& f) { visit_fields(*this, f); }
  template <class F>
  void visit(F&& f) const { visit_fields(*this, f); }

 private:
  template <class Self, class F>
  static void visit_fields(Self& self, F& f) {
    f("pam.input_proj", self.input_proj);
    f("pam.pos_embed", self.pos_embed);
    for (std::size_t b = 0; b < self.branches.size(); ++b) self.branches[b].visit("pam.gt." + std::to_string(b) + ".", f);
    f("pam.pose_head.w", self.pose_head_w);
    f("pam.pose_head.b", self.pose_head_b);
    f("pam.shape_head.w", self.shape_head_w);
    f("pam.shape_head.b", self.shape_head_b);
    f("pam.camera_head.w", self.camera_head_w);
    f("pam.camera_head.b", self.camera_head_b);
  }
};

/// rng == nullptr gives all-zero parameters; otherwise a seeded init with the
/// camera bias at (s, tx, ty) = (1, 0, 0).
inline LifterParams make_lifter(const SkeletonTopology& topology, const LifterConfig& config, Rng* rng) {
  validate(config.trunk);
  LifterParams p;
  p.config = config;
  p.topology = topology;
  p.adjacency = build_adjacency(topology);
  const std::size_t j = topology.joint_count();
  const std::size_t d = config.trunk.dim;
  p.input_proj = rng ? glorot(*rng, 2, d) : Tensor({2, d});
  p.pos_embed = rng ? rng->uniform_tensor({j, d}, -0.1, 0.1) : Tensor({j, d});
  p.branches = make_parallel_branches(config.trunk, rng);
  p.pose_head_w = rng ? glorot(*rng, d, 3) : Tensor({d, 3});
  p.pose_head_b = Tensor({3});
  p.shape_head_w = rng ? glorot(*rng, d, kShapeCoeffs, 0.1) : Tensor({d, kShapeCoeffs});
  p.shape_head_b = Tensor({kShapeCoeffs});
  p.camera_head_w = rng ? glorot(*rng, d, kCameraParams, 0.1) : Tensor({d, kCameraParams});
  p.camera_head_b = Tensor({kCameraParams});
  if (rng) p.camera_head_b[0] = 1.0;
  return p;
}

struct LifterOutput {
  Tensor features;  // F, J x D
  Tensor joints3d;  // P, J x 3, root-relative
  Tensor shape;     // beta, 10
  Tensor camera;    // C = (s, tx, ty)
};

namespace ad {

struct LifterVars {
  Var features, joints3d, shape, camera;
};

/// Per-joint linear map of (x, y) into D dims plus the positional embedding.
inline Var project_embed(Var pose, const LifterParams& p, Binder& bind) {
  require(pose.value().rank() == 2 && pose.value().cols() == 2 && pose.value().rows() == p.joints(),
          "project_embed: pose " + to_string(pose.dims()) + " does not match " + std::to_string(p.joints()) + " joints");
  return matmul(pose, bind(p.input_proj)) + bind(p.pos_embed);
}

inline LifterVars lifter_forward(Var pose, const LifterParams& p, Binder& bind) {
  Tape& tape = pose.tape();
  Var f = parallel_fuse(project_embed(pose, p, bind), tape.constant(p.adjacency), p.branches, bind);
  Var joints = add_row_bias(matmul(f, bind(p.pose_head_w)), bind(p.pose_head_b));
  Var pooled = mean_rows(f);
  Var shape = reshape(add_row_bias(matmul(pooled, bind(p.shape_head_w)), bind(p.shape_head_b)), {kShapeCoeffs});
  Var cam = reshape(add_row_bias(matmul(pooled, bind(p.camera_head_w)), bind(p.camera_head_b)), {kCameraParams});
  return {f, joints, shape, cam};
}

}  // namespace ad

inline Tensor project_embed(const Pose2D& pose, const LifterParams& p) {
  ad::Tape t(false);
  ad::Binder b(t, false);
  return ad::project_embed(t.constant(pose.coords), p, b).value();
}

inline LifterOutput lifter_forward(const Pose2D& pose, const LifterParams& p) {
  ad::Tape t(false);
  ad::Binder b(t, false);
  const auto out = ad::lifter_forward(t.constant(pose.coords), p, b);
  return {out.features.value(), out.joints3d.value(), out.shape.value(), out.camera.value()};
}

}  // namespace liftmesh
