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
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "liftmesh/core/tensor.hpp"
#include "liftmesh/skeleton.hpp"

namespace liftmesh {

using Mat3 = std::array<std::array<double, 3>, 3>;

struct Svd3 {
  Mat3 u{}, v{};
  std::array<double, 3> s{};  // descending
};

namespace detail {

inline double det3(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline Mat3 identity3() {
  Mat3 m{};
  for (int i = 0; i < 3; ++i) m[i][i] = 1.0;
  return m;
}

}  // namespace detail

/// One-sided Jacobi SVD of a 3x3 matrix: a = u diag(s) v^T, with u and v
/// orthogonal and s sorted descending.
inline Svd3 svd3(const Mat3& a) {
  Mat3 w = a;  // columns are rotated until mutually orthogonal
  Mat3 v = detail::identity3();
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        double alpha = 0, beta = 0, gamma = 0;
        for (int i = 0; i < 3; ++i) {
          alpha += w[i][p] * w[i][p];
          beta += w[i][q] * w[i][q];
          gamma += w[i][p] * w[i][q];
        }
        if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < 3; ++i) {
          const double wp = w[i][p], wq = w[i][q];
          w[i][p] = c * wp - s * wq;
          w[i][q] = s * wp + c * wq;
          const double vp = v[i][p], vq = v[i][q];
          v[i][p] = c * vp - s * vq;
          v[i][q] = s * vp + c * vq;
        }
      }
    if (!rotated) break;
  }

  std::array<double, 3> sig{};
  for (int k = 0; k < 3; ++k) sig[k] = std::sqrt(w[0][k] * w[0][k] + w[1][k] * w[1][k] + w[2][k] * w[2][k]);
  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int x, int y) { return sig[x] > sig[y]; });

  Svd3 out;
  const double tiny = 1e-300 + 1e-14 * sig[order[0]];
  int rank = 0;
  for (int k = 0; k < 3; ++k) {
    const int src = order[k];
    out.s[k] = sig[src];
    for (int i = 0; i < 3; ++i) out.v[i][k] = v[i][src];
    if (sig[src] > tiny) {
      ++rank;
      for (int i = 0; i < 3; ++i) out.u[i][k] = w[i][src] / sig[src];
    }
  }
  // Complete u to an orthonormal basis for rank-deficient inputs.
  auto col = [&](int k) { return std::array<double, 3>{out.u[0][k], out.u[1][k], out.u[2][k]}; };
  auto set_col = [&](int k, std::array<double, 3> c) {
    for (int i = 0; i < 3; ++i) out.u[i][k] = c[i];
  };
  if (rank == 0) {
    out.u = detail::identity3();
  } else {
    if (rank == 1) {
      const auto a0 = col(0);
      std::array<double, 3> e{0, 0, 0};
      e[std::abs(a0[0]) < 0.6 ? 0 : 1] = 1.0;
      const double d = e[0] * a0[0] + e[1] * a0[1] + e[2] * a0[2];
      std::array<double, 3> c{e[0] - d * a0[0], e[1] - d * a0[1], e[2] - d * a0[2]};
      const double n = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
      for (double& x : c) x /= n;
      set_col(1, c);
    }
    if (rank <= 2) {
      const auto a = col(0), b = col(1);
      set_col(2, {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]});
    }
  }
  return out;
}

/// x -> scale * rotation * x + translation, for row-vector points.
struct Similarity {
  double scale = 1.0;
  Mat3 rotation = detail::identity3();
  std::array<double, 3> translation{};

  Tensor apply(const Tensor& points) const {
    require(points.rank() == 2 && points.cols() == 3, "similarity applies to N x 3 points");
    Tensor out(points.dims());
    for (std::size_t n = 0; n < points.rows(); ++n)
      for (int r = 0; r < 3; ++r) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) s += rotation[r][c] * points(n, c);
        out(n, r) = scale * s + translation[r];
      }
    return out;
  }
};

namespace detail {

inline void require_same_points(const Tensor& a, const Tensor& b, const char* what) {
  require(a.rank() == 2 && a.cols() == 3 && b.rank() == 2 && b.cols() == 3, std::string(what) + ": expected N x 3 points");
  require(a.rows() == b.rows(), std::string(what) + ": point counts differ (" + std::to_string(a.rows()) + " vs " +
                                    std::to_string(b.rows()) + ")");
}

inline std::array<double, 3> centroid(const Tensor& p) {
  std::array<double, 3> c{};
  for (std::size_t n = 0; n < p.rows(); ++n)
    for (int k = 0; k < 3; ++k) c[k] += p(n, k);
  for (double& x : c) x /= static_cast<double>(p.rows());
  return c;
}

inline double mean_distance_after_shift(const Tensor& a, const std::array<double, 3>& sa, const Tensor& b,
                                        const std::array<double, 3>& sb) {
  double total = 0.0;
  for (std::size_t n = 0; n < a.rows(); ++n) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = (a(n, k) - sa[k]) - (b(n, k) - sb[k]);
      d2 += d * d;
    }
    total += std::sqrt(d2);
  }
  return total / static_cast<double>(a.rows());
}

}  // namespace detail

/// Mean per-joint distance after moving both root joints to the origin.
/// Result is in the units of the inputs.
inline double mpjpe(const Pose3D& pred, const Pose3D& gt, std::size_t root = 0) {
  detail::require_same_points(pred.coords, gt.coords, "mpjpe");
  require(root < gt.joint_count(), "mpjpe root index out of range");
  const std::array<double, 3> rp{pred.coords(root, 0), pred.coords(root, 1), pred.coords(root, 2)};
  const std::array<double, 3> rg{gt.coords(root, 0), gt.coords(root, 1), gt.coords(root, 2)};
  return detail::mean_distance_after_shift(pred.coords, rp, gt.coords, rg);
}

/// Similarity transform minimising sum |s R pred_j + t - gt_j|^2, with
/// det R = +1.
inline Similarity procrustes_align(const Pose3D& pred, const Pose3D& gt) {
  detail::require_same_points(pred.coords, gt.coords, "procrustes_align");
  require(gt.joint_count() >= 3, "procrustes_align needs at least 3 joints");
  const auto mp = detail::centroid(pred.coords);
  const auto mg = detail::centroid(gt.coords);
  Mat3 h{};
  double var_pred = 0.0, var_gt = 0.0;
  for (std::size_t n = 0; n < pred.joint_count(); ++n) {
    double x[3], y[3];
    for (int k = 0; k < 3; ++k) {
      x[k] = pred.coords(n, k) - mp[k];
      y[k] = gt.coords(n, k) - mg[k];
      var_pred += x[k] * x[k];
      var_gt += y[k] * y[k];
    }
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) h[r][c] += x[r] * y[c];
  }
  if (!(var_pred > 0.0) || !(var_gt > 0.0))
    throw AlignmentError("procrustes_align: degenerate point set (zero variance)");

  const Svd3 svd = svd3(h);
  // R = V D U^T with D flipping the smallest axis when needed.
  Mat3 vut{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 3; ++k) vut[r][c] += svd.v[r][k] * svd.u[c][k];
  const double sign = detail::det3(vut) < 0.0 ? -1.0 : 1.0;
  const double d[3] = {1.0, 1.0, sign};

  Similarity out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += svd.v[r][k] * d[k] * svd.u[c][k];
      out.rotation[r][c] = s;
    }
  out.scale = (svd.s[0] * d[0] + svd.s[1] * d[1] + svd.s[2] * d[2]) / var_pred;
  for (int r = 0; r < 3; ++r) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += out.rotation[r][c] * mp[c];
    out.translation[r] = mg[r] - out.scale * s;
  }
  return out;
}

inline double pa_mpjpe(const Pose3D& pred, const Pose3D& gt) {
  if (pred.coords == gt.coords) return 0.0;
  const Similarity tf = procrustes_align(pred, gt);
  const Tensor aligned = tf.apply(pred.coords);
  return detail::mean_distance_after_shift(aligned, {0, 0, 0}, gt.coords, {0, 0, 0});
}

/// Mean per-vertex distance after translating both meshes so that the
/// root vertex coincides.
inline double mpve(const Tensor& pred_vertices, const Tensor& gt_vertices, std::size_t root = 0) {
  detail::require_same_points(pred_vertices, gt_vertices, "mpve");
  require(root < gt_vertices.rows(), "mpve root vertex out of range");
  const std::array<double, 3> rp{pred_vertices(root, 0), pred_vertices(root, 1), pred_vertices(root, 2)};
  const std::array<double, 3> rg{gt_vertices(root, 0), gt_vertices(root, 1), gt_vertices(root, 2)};
  return detail::mean_distance_after_shift(pred_vertices, rp, gt_vertices, rg);
}

struct EvalReport {
  double mpjpe_mm = 0.0;
  double pa_mpjpe_mm = 0.0;
  std::optional<double> mpve_mm;
  std::size_t n_samples = 0;
  std::vector<double> per_sample_mpjpe;
  std::vector<double> per_sample_pa_mpjpe;
  std::vector<double> per_sample_mpve;

  std::string to_key_value() const {
    std::ostringstream os;
    os.precision(17);
    os << "mpjpe_mm=" << mpjpe_mm << "\npa_mpjpe_mm=" << pa_mpjpe_mm << '\n';
    if (mpve_mm) os << "mpve_mm=" << *mpve_mm << '\n';
    os << "n_samples=" << n_samples << '\n';
    return os.str();
  }
};

/// Aggregates are plain means of per-sample values, accumulated in input order.
inline EvalReport evaluate(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts,
                           const std::vector<Tensor>& mesh_preds = {}, const std::vector<Tensor>& mesh_gts = {},
                           std::size_t root = 0) {
  require(preds.size() == gts.size(), "evaluate: prediction and ground-truth counts differ");
  require(mesh_preds.size() == mesh_gts.size(), "evaluate: mesh prediction and ground-truth counts differ");
  EvalReport r;
  r.n_samples = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    r.per_sample_mpjpe.push_back(mpjpe(preds[i], gts[i], root));
    r.per_sample_pa_mpjpe.push_back(pa_mpjpe(preds[i], gts[i]));
  }
  for (std::size_t i = 0; i < mesh_preds.size(); ++i) r.per_sample_mpve.push_back(mpve(mesh_preds[i], mesh_gts[i]));
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  r.mpjpe_mm = mean(r.per_sample_mpjpe);
  r.pa_mpjpe_mm = mean(r.per_sample_pa_mpjpe);
  if (!mesh_preds.empty()) r.mpve_mm = mean(r.per_sample_mpve);
  return r;
}

}  // namespace liftmesh
