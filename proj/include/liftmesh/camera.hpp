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

#include "liftmesh/core/ops.hpp"

namespace liftmesh {

/// Weak-perspective camera: uniform scale then 2D translation, depth dropped.
struct WeakPerspective {
  double s = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  // Interprets a camera vector C = (s, tx, ty).
  static WeakPerspective from_vector(const Tensor& c) {
    require(c.size() == 3, "camera vector must have 3 entries");
    return {c[0], c[1], c[2]};
  }
  Tensor to_vector() const { return Tensor::vector({s, tx, ty}); }
};

inline Tensor weak_perspective_project(const Tensor& joints, const WeakPerspective& cam) {
  require(joints.rank() == 2 && joints.cols() == 3, "weak_perspective_project expects J x 3 joints");
  require(std::isfinite(cam.s) && std::isfinite(cam.tx) && std::isfinite(cam.ty), "camera must be finite");
  require(cam.s > 0.0, "weak-perspective scale must be positive, got " + std::to_string(cam.s));
  Tensor out({joints.rows(), 2});
  for (std::size_t j = 0; j < joints.rows(); ++j) {
    out(j, 0) = cam.s * joints(j, 0) + cam.tx;
    out(j, 1) = cam.s * joints(j, 1) + cam.ty;
  }
  return out;
}

namespace ad {

// Tape form over a raw camera vector; the scale sign is not checked because
// network predictions may pass through non-positive values while training.
inline Var weak_perspective_project(Var joints, Var cam) {
  const Tensor& jv = joints.value();
  require(jv.rank() == 2 && jv.cols() == 3, "weak_perspective_project expects J x 3 joints");
  require(cam.size() == 3, "camera vector must have 3 entries");
  const Tensor& c = cam.value();
  Tensor out({jv.rows(), 2});
  for (std::size_t j = 0; j < jv.rows(); ++j) {
    out(j, 0) = c[0] * jv(j, 0) + c[1];
    out(j, 1) = c[0] * jv(j, 1) + c[2];
  }
  return joints.tape().record(std::move(out), {joints, cam}, [joints, cam](Tape& t, const Tensor& g) {
    const Tensor& jv = joints.value();
    const Tensor& c = cam.value();
    if (t.requires_grad(joints)) {
      Tensor& gj = t.grad_buffer(joints);
      for (std::size_t j = 0; j < jv.rows(); ++j) {
        gj(j, 0) += c[0] * g(j, 0);
        gj(j, 1) += c[0] * g(j, 1);
      }
    }
    if (t.requires_grad(cam)) {
      Tensor& gc = t.grad_buffer(cam);
      for (std::size_t j = 0; j < jv.rows(); ++j) {
        gc[0] += g(j, 0) * jv(j, 0) + g(j, 1) * jv(j, 1);
        gc[1] += g(j, 0);
        gc[2] += g(j, 1);
      }
    }
  });
}

}  // namespace ad
}  // namespace liftmesh
