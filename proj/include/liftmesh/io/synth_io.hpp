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

// Synthetic samples as pose-file records with the generating parameters
// attached: "theta" (24 x 3), "beta", "cam" (s, tx, ty) and "vertices"
// (V x 3, mm) alongside the usual "joints" and "gt3d" (mm).

#include <string>
#include <vector>

#include "liftmesh/io/pose_file.hpp"
#include "liftmesh/training.hpp"

namespace liftmesh {

inline Tensor scaled(Tensor t, double k) {
  for (double& v : t.data()) v *= k;
  return t;
}

inline json synth_to_json(const SynthSample& s, std::size_t id) {
  PoseRecord rec;
  rec.id = id;
  rec.pose = make_pose2d(s.pose2d);
  rec.gt3d = scaled(s.gt_joints3d, kMillimetersPerMeter);
  json j = pose_record_to_json(rec);
  j["theta"] = rows_to_json(s.gt_theta);
  j["beta"] = s.gt_beta.values();
  j["cam"] = s.gt_cam.to_vector().values();
  j["vertices"] = rows_to_json(scaled(s.gt_vertices, kMillimetersPerMeter));
  return j;
}

inline SynthSample synth_from_json(const json& j, std::size_t line_no) {
  const std::string where = "synthetic record " + std::to_string(line_no);
  const PoseRecord rec = parse_pose_record(j.dump(), line_no);
  for (const char* key : {"theta", "beta", "cam", "vertices"})
    if (!j.contains(key)) throw FormatError(where + ": missing '" + key + "'");
  if (!rec.gt3d) throw FormatError(where + ": missing 'gt3d'");
  auto vec = [&](const char* key, std::size_t n) {
    const json& a = j[key];
    if (!a.is_array() || a.size() != n) throw FormatError(where + ": '" + key + "' must hold " + std::to_string(n) + " numbers");
    std::vector<double> v;
    for (const json& x : a) {
      if (!x.is_number()) throw FormatError(where + ": '" + key + "' holds a non-number");
      v.push_back(x.get<double>());
    }
    return Tensor::vector(std::move(v));
  };
  SynthSample s;
  s.pose2d = rec.pose.coords;
  s.gt_joints3d = scaled(*rec.gt3d, 1.0 / kMillimetersPerMeter);
  s.gt_theta = detail::rows_from_json(j["theta"], 3, where + ": theta");
  if (s.gt_theta.rows() != kBodyJoints) throw FormatError(where + ": theta must be 24 x 3");
  s.gt_beta = vec("beta", kShapeCoeffs);
  s.gt_cam = WeakPerspective::from_vector(vec("cam", 3));
  s.gt_vertices = scaled(detail::rows_from_json(j["vertices"], 3, where + ": vertices"), 1.0 / kMillimetersPerMeter);
  return s;
}

inline std::vector<SynthSample> read_synth_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<SynthSample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("synthetic record " + std::to_string(n) + ": invalid JSON (" + e.what() + ")");
    }
    out.push_back(synth_from_json(j, n));
  }
  return out;
}

}  // namespace liftmesh
