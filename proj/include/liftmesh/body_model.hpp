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

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "liftmesh/core/ops.hpp"
#include "liftmesh/core/rng.hpp"

namespace liftmesh {

inline constexpr std::size_t kBodyJoints = 24;
inline constexpr std::size_t kPoseParams = kBodyJoints * 3;

/// SMPL-style parametric body. Vertices in meters. `parents[0]` is -1 and
/// every other parent index precedes its child.
struct BodyModel {
  Tensor template_vertices;  // V x 3
  Tensor shape_dirs;         // V x 3 x S
  Tensor joint_regressor;    // K x V
  std::vector<std::int64_t> parents;  // K
  Tensor skin_weights;       // V x K
  std::vector<std::array<std::int64_t, 3>> faces;

  std::size_t vertex_count() const { return template_vertices.rows(); }
  std::size_t joint_count() const { return parents.size(); }
  std::size_t shape_count() const { return shape_dirs.dim(2); }
};

inline void validate(const BodyModel& m) {
  require(m.template_vertices.rank() == 2 && m.template_vertices.cols() == 3, "body template must be V x 3");
  const std::size_t v = m.vertex_count();
  const std::size_t k = m.joint_count();
  require(k >= 1, "body model has no joints");
  require(m.shape_dirs.rank() == 3 && m.shape_dirs.dim(0) == v && m.shape_dirs.dim(1) == 3,
          "body shape_dirs must be V x 3 x S, got " + to_string(m.shape_dirs.dims()));
  require(m.joint_regressor.rank() == 2 && m.joint_regressor.rows() == k && m.joint_regressor.cols() == v,
          "body joint_regressor must be K x V, got " + to_string(m.joint_regressor.dims()));
  require(m.skin_weights.rank() == 2 && m.skin_weights.rows() == v && m.skin_weights.cols() == k,
          "body skin_weights must be V x K, got " + to_string(m.skin_weights.dims()));
  require(m.parents[0] == -1, "body parents[0] must be -1");
  for (std::size_t j = 1; j < k; ++j)
    require(m.parents[j] >= 0 && static_cast<std::size_t>(m.parents[j]) < j,
            "body parent of joint " + std::to_string(j) + " must precede it");
  for (std::size_t r = 0; r < v; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      require(m.skin_weights(r, c) >= 0.0, "negative skin weight at vertex " + std::to_string(r));
      s += m.skin_weights(r, c);
    }
    require(std::abs(s - 1.0) <= 1e-6, "skin weights of vertex " + std::to_string(r) + " do not sum to 1");
  }
  for (const auto& f : m.faces)
    for (auto idx : f) require(idx >= 0 && static_cast<std::size_t>(idx) < v, "face index out of range");
}

// SMPL joint indices for each h36m17 joint, in h36m17 order.
inline const std::vector<std::size_t>& smpl_to_h36m17() {
  static const std::vector<std::size_t> map = {0, 2, 5, 8, 1, 4, 7, 3, 9, 12, 15, 16, 18, 20, 17, 19, 21};
  return map;
}

namespace detail {

inline std::array<double, 9> skew(const double* v) {
  return {0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0};
}

inline std::array<double, 9> mat3_mul(const std::array<double, 9>& a, const std::array<double, 9>& b) {
  std::array<double, 9> c{};
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k)
      for (int col = 0; col < 3; ++col) c[3 * r + col] += a[3 * r + k] * b[3 * k + col];
  return c;
}

inline constexpr double kSmallAngle = 1e-8;

inline std::array<double, 9> rodrigues3(const double* v) {
  const double theta = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  const auto k = skew(v);
  std::array<double, 9> r = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  if (theta < kSmallAngle) {
    for (int i = 0; i < 9; ++i) r[i] += k[i];
    return r;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  const auto k2 = mat3_mul(k, k);
  for (int i = 0; i < 9; ++i) r[i] += a * k[i] + b * k2[i];
  return r;
}

}  // namespace detail

/// Axis-angle 3-vector to rotation matrix. Below 1e-8 rad the result is
/// I + [v]x.
inline Tensor rodrigues(const Tensor& axis_angle) {
  require(axis_angle.size() == 3, "rodrigues expects a 3-vector");
  const auto r = detail::rodrigues3(axis_angle.data().data());
  return Tensor({3, 3}, std::vector<double>(r.begin(), r.end()));
}

namespace ad {

inline Var rodrigues(Var axis_angle) {
  require(axis_angle.size() == 3, "rodrigues expects a 3-vector");
  const double* v = axis_angle.value().data().data();
  const auto rot = liftmesh::detail::rodrigues3(v);
  Tensor out({3, 3}, std::vector<double>(rot.begin(), rot.end()));
  return axis_angle.tape().record(std::move(out), {axis_angle}, [axis_angle, rot](Tape& t, const Tensor& g) {
    const double* v = axis_angle.value().data().data();
    const double theta2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    Tensor& gv = t.grad_buffer(axis_angle);
    if (std::sqrt(theta2) < liftmesh::detail::kSmallAngle) {
      // d/dv_i (I + [v]x) = [e_i]x
      gv[0] += g[7] - g[5];
      gv[1] += g[2] - g[6];
      gv[2] += g[3] - g[1];
      return;
    }
    // dR/dv_i = (v_i [v]x + [v x ((I - R) e_i)]x) R / |v|^2
    const auto k = liftmesh::detail::skew(v);
    for (int i = 0; i < 3; ++i) {
      double col[3];  // (I - R) e_i
      for (int r = 0; r < 3; ++r) col[r] = (r == i ? 1.0 : 0.0) - rot[3 * r + i];
      const double cr[3] = {v[1] * col[2] - v[2] * col[1], v[2] * col[0] - v[0] * col[2],
                            v[0] * col[1] - v[1] * col[0]};
      const auto kc = liftmesh::detail::skew(cr);
      std::array<double, 9> m{};
      for (int e = 0; e < 9; ++e) m[e] = (v[i] * k[e] + kc[e]) / theta2;
      const auto d = liftmesh::detail::mat3_mul(m, rot);
      double s = 0.0;
      for (int e = 0; e < 9; ++e) s += g[e] * d[e];
      gv[i] += s;
    }
  });
}

/// template + sum_k beta_k * shape_dirs[:, :, k].
inline Var apply_shape(const BodyModel& m, Var beta) {
  const std::size_t v = m.vertex_count();
  const std::size_t s = m.shape_count();
  require(beta.size() == s, "beta length " + std::to_string(beta.size()) + " vs " + std::to_string(s) + " shape dirs");
  Tape& t = beta.tape();
  Var dirs = t.constant(m.shape_dirs.reshaped({v * 3, s}));
  Var offsets = reshape(matmul(dirs, reshape(beta, {s, 1})), {v, 3});
  return t.constant(m.template_vertices) + offsets;
}

inline Var regress_joints(const BodyModel& m, Var vertices) {
  require(vertices.value().rank() == 2 && vertices.value().rows() == m.vertex_count() && vertices.value().cols() == 3,
          "regress_joints: vertices " + to_string(vertices.dims()) + " vs model V=" + std::to_string(m.vertex_count()));
  return matmul(vertices.tape().constant(m.joint_regressor), vertices);
}

struct PosedVars {
  Var vertices;  // V x 3
  Var joints;    // K x 3
};

/// Shape, regress the rest joints, chain per-joint rotations about the rest
/// joints down the kinematic tree and skin with linear blend weights.
inline PosedVars forward_kinematics_lbs(const BodyModel& m, Var theta, Var beta) {
  const std::size_t k = m.joint_count();
  require(theta.size() == k * 3, "theta must hold " + std::to_string(k) + " axis-angle rows");
  Tape& t = theta.tape();
  Var pose = reshape(theta, {k, 3});
  Var shaped = apply_shape(m, beta);
  Var rest = regress_joints(m, shaped);

  std::vector<Var> world_rot(k), world_pos(k), rest_j(k), packed(k);
  for (std::size_t j = 0; j < k; ++j) {
    Var local = rodrigues(slice_rows(pose, j, 1));
    rest_j[j] = slice_rows(rest, j, 1);
    if (j == 0) {
      world_rot[j] = local;
      world_pos[j] = rest_j[j];
    } else {
      const auto p = static_cast<std::size_t>(m.parents[j]);
      world_rot[j] = matmul(world_rot[p], local);
      world_pos[j] = world_pos[p] + matmul_nt(rest_j[j] - rest_j[p], world_rot[p]);
    }
    // Rest-relative transform: x -> R x + (t - R J_rest).
    Var offset = world_pos[j] - matmul_nt(rest_j[j], world_rot[j]);
    packed[j] = concat_cols({reshape(world_rot[j], {1, 9}), offset});
  }
  Var blend = matmul(t.constant(m.skin_weights), concat_rows(std::span<const Var>(packed)));
  return {affine_rows(blend, shaped), concat_rows(std::span<const Var>(world_pos))};
}

}  // namespace ad

inline Tensor apply_shape(const BodyModel& m, const Tensor& beta) {
  ad::Tape t(false);
  return ad::apply_shape(m, t.constant(beta)).value();
}

inline Tensor regress_joints(const BodyModel& m, const Tensor& vertices) {
  ad::Tape t(false);
  return ad::regress_joints(m, t.constant(vertices)).value();
}

struct PosedMesh {
  Tensor vertices;
  Tensor joints;
};

inline PosedMesh forward_kinematics_lbs(const BodyModel& m, const Tensor& theta, const Tensor& beta) {
  ad::Tape t(false);
  const auto out = ad::forward_kinematics_lbs(m, t.constant(theta), t.constant(beta));
  return {out.vertices.value(), out.joints.value()};
}

/// Deterministic pseudo-body with SMPL's 24-joint tree: four ring vertices
/// around each joint (the regressor averages them) plus the remaining
/// vertices spread along bones. Requires at least 96 vertices.
inline BodyModel make_desk_body_model(std::size_t vertices = 120, bool hard_weights = false) {
  constexpr std::size_t k = kBodyJoints;
  require(vertices >= 4 * k, "desk body model needs at least 96 vertices");
  static const std::int64_t parents[k] = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
  static const double offsets[k][3] = {
      {0, 0, 0},          {0.09, -0.08, 0},    {-0.09, -0.08, 0},  {0, 0.11, -0.01},   {0.01, -0.38, 0},
      {-0.01, -0.38, 0},  {0, 0.13, 0.01},     {0, -0.40, -0.02},  {0, -0.40, -0.02},  {0, 0.06, 0},
      {0.02, -0.05, 0.12}, {-0.02, -0.05, 0.12}, {0, 0.21, -0.02}, {0.07, 0.12, -0.01}, {-0.07, 0.12, -0.01},
      {0, 0.09, 0.05},    {0.11, 0.04, -0.01}, {-0.11, 0.04, -0.01}, {0.26, -0.01, -0.02}, {-0.26, -0.01, -0.02},
      {0.25, 0.01, 0},    {-0.25, 0.01, 0},    {0.08, -0.01, -0.01}, {-0.08, -0.01, -0.01}};

  std::array<std::array<double, 3>, k> joint{};
  for (std::size_t j = 0; j < k; ++j)
    for (int c = 0; c < 3; ++c) joint[j][c] = (j ? joint[parents[j]][c] : 0.0) + offsets[j][c];

  auto normalize = [](std::array<double, 3> a) {
    const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    for (double& x : a) x /= n;
    return a;
  };
  auto cross = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return std::array<double, 3>{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
  };
  // Orthonormal frame (u, w) perpendicular to the bone entering each joint.
  std::array<std::array<double, 3>, k> fu{}, fw{};
  for (std::size_t j = 0; j < k; ++j) {
    std::array<double, 3> dir = {0, 1, 0};
    if (j) dir = normalize({offsets[j][0], offsets[j][1], offsets[j][2]});
    std::array<double, 3> ref = std::abs(dir[2]) < 0.9 ? std::array<double, 3>{0, 0, 1} : std::array<double, 3>{1, 0, 0};
    fu[j] = normalize(cross(dir, ref));
    fw[j] = cross(dir, fu[j]);
  }
  auto radius = [](std::size_t j) { return j == 15 ? 0.07 : (j >= 20 ? 0.025 : 0.04); };

  BodyModel m;
  m.parents.assign(parents, parents + k);
  m.template_vertices = Tensor({vertices, 3});
  m.joint_regressor = Tensor({k, vertices});
  m.skin_weights = Tensor({vertices, k});
  std::vector<std::size_t> owner(vertices);

  std::size_t vi = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const double r = radius(j);
    const double signs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& s : signs) {
      for (int c = 0; c < 3; ++c) m.template_vertices(vi, c) = joint[j][c] + r * (s[0] * fu[j][c] + s[1] * fw[j][c]);
      m.joint_regressor(j, vi) = 0.25;
      owner[vi] = j;
      if (j == 0 || hard_weights) {
        m.skin_weights(vi, j) = 1.0;
      } else {
        m.skin_weights(vi, j) = 0.5;
        m.skin_weights(vi, static_cast<std::size_t>(parents[j])) = 0.5;
      }
      ++vi;
    }
  }
  // Tube faces between each joint ring and its parent's ring.
  static const std::int64_t ring_order[4] = {0, 2, 1, 3};
  for (std::size_t j = 1; j < k; ++j) {
    const auto a = static_cast<std::int64_t>(4 * j), b = 4 * parents[j];
    for (int i = 0; i < 4; ++i) {
      const std::int64_t i0 = ring_order[i], i1 = ring_order[(i + 1) % 4];
      m.faces.push_back({b + i0, b + i1, a + i1});
      m.faces.push_back({b + i0, a + i1, a + i0});
    }
  }
  // Bone vertices, round-robin over non-root joints at staggered fractions.
  for (std::size_t n = 0; vi < vertices; ++n, ++vi) {
    const std::size_t j = 1 + n % (k - 1);
    const std::size_t round = n / (k - 1);
    const auto p = static_cast<std::size_t>(parents[j]);
    static const double fractions[3] = {0.5, 0.25, 0.75};
    const double f = fractions[round % 3];
    const double phi = 0.7 * static_cast<double>(n);
    const double r = radius(j);
    for (int c = 0; c < 3; ++c)
      m.template_vertices(vi, c) = joint[p][c] + f * offsets[j][c] + r * (std::cos(phi) * fu[j][c] + std::sin(phi) * fw[j][c]);
    owner[vi] = j;
    if (hard_weights) {
      m.skin_weights(vi, p) = 1.0;
    } else {
      m.skin_weights(vi, p) = 1.0 - f * f;
      m.skin_weights(vi, j) = f * f;
    }
  }

  constexpr std::size_t s = 10;
  m.shape_dirs = Tensor({vertices, 3, s});
  Rng rng(0x6465736bULL);
  std::vector<std::array<double, 3>> joint_dirs(k * (s - 4));
  for (auto& a : joint_dirs)
    for (double& x : a) x = rng.uniform(-0.01, 0.01);
  for (std::size_t v = 0; v < vertices; ++v) {
    const double x = m.template_vertices(v, 0), y = m.template_vertices(v, 1), z = m.template_vertices(v, 2);
    const std::size_t o = owner[v];
    const double rel[3] = {x - joint[o][0], y - joint[o][1], z - joint[o][2]};
    const double pos[3] = {x, y, z};
    for (int c = 0; c < 3; ++c) {
      m.shape_dirs(v, c, 0) = 0.03 * pos[c];              // overall size
      m.shape_dirs(v, c, 1) = c == 1 ? 0.03 * y : 0.0;    // height
      m.shape_dirs(v, c, 2) = c == 0 ? 0.03 * x : 0.0;    // width
      m.shape_dirs(v, c, 3) = 0.2 * rel[c];               // girth around the owning joint
      for (std::size_t d = 4; d < s; ++d) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += m.skin_weights(v, j) * joint_dirs[(d - 4) * k + j][c];
        m.shape_dirs(v, c, d) = acc;
      }
    }
  }
  return m;
}

}  // namespace liftmesh
