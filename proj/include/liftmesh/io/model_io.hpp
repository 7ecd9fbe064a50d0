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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "liftmesh/body_model.hpp"
#include "liftmesh/io/checkpoint.hpp"
#include "liftmesh/lifter.hpp"
#include "liftmesh/pose_shape_estimator.hpp"

namespace liftmesh {

namespace detail {

template <class Params>
void put_params(TensorMap& out, const Params& p) {
  p.visit([&](const std::string& name, const Tensor& t) { out[name] = t; });
}

// Fills every visited tensor from the map, checking dims.
template <class Params>
void take_params(const TensorMap& in, Params& p) {
  p.visit([&](const std::string& name, Tensor& t) {
    const Tensor& src = get_tensor(in, name);
    if (src.dims() != t.dims())
      throw FormatError("entry '" + name + "' has dims " + to_string(src.dims()) + ", expected " + to_string(t.dims()));
    t = src;
  });
}

inline std::size_t meta_at(const IntTensor& meta, std::size_t i, const std::string& name) {
  if (meta.data.size() <= i) throw FormatError("entry '" + name + "' is too short");
  if (meta.data[i] < 0) throw FormatError("entry '" + name + "' holds a negative value");
  return static_cast<std::size_t>(meta.data[i]);
}

// Parent index per joint (-1 at the root), by walking edges from the root.
inline std::vector<std::int64_t> parent_array(const SkeletonTopology& topo) {
  std::vector<std::int64_t> parents(topo.joint_count(), -2);
  parents[topo.root] = -1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Edge& e : topo.edges) {
      if (parents[e.parent] != -2 && parents[e.child] == -2 && e.child != topo.root) {
        parents[e.child] = static_cast<std::int64_t>(e.parent);
        changed = true;
      } else if (parents[e.child] != -2 && parents[e.parent] == -2 && e.parent != topo.root) {
        parents[e.parent] = static_cast<std::int64_t>(e.child);
        changed = true;
      }
    }
  }
  return parents;
}

inline SkeletonTopology topology_from_parents(const std::vector<std::int64_t>& parents) {
  for (const auto& [name, topo] : default_topologies())
    if (parent_array(topo) == parents) return topo;
  SkeletonTopology t;
  t.name = "custom";
  bool rooted = false;
  for (std::size_t j = 0; j < parents.size(); ++j) {
    t.joint_names.push_back("j" + std::to_string(j));
    if (parents[j] == -1) {
      if (rooted) throw FormatError("topology parents have more than one root");
      t.root = j;
      rooted = true;
    } else if (parents[j] < 0 || static_cast<std::size_t>(parents[j]) >= parents.size()) {
      throw FormatError("topology parent index out of range at joint " + std::to_string(j));
    } else {
      t.edges.push_back({static_cast<std::size_t>(parents[j]), j});
    }
  }
  try {
    validate(t);
  } catch (const TopologyError& e) {
    throw FormatError(std::string("stored topology is invalid: ") + e.what());
  }
  return t;
}

}  // namespace detail

inline void put_lifter(TensorMap& out, const LifterParams& p) {
  const ParallelConfig& c = p.config.trunk;
  out["pam.meta"] = IntTensor::vector({static_cast<std::int64_t>(p.joints()), static_cast<std::int64_t>(c.dim),
                                       static_cast<std::int64_t>(c.branches), static_cast<std::int64_t>(c.blocks),
                                       static_cast<std::int64_t>(c.heads), static_cast<std::int64_t>(c.ff_mult)});
  out["pam.topology.parents"] = IntTensor::vector(detail::parent_array(p.topology));
  detail::put_params(out, p);
}

inline LifterParams take_lifter(const TensorMap& in) {
  const IntTensor& meta = get_int_tensor(in, "pam.meta");
  LifterConfig cfg;
  cfg.trunk.dim = detail::meta_at(meta, 1, "pam.meta");
  cfg.trunk.branches = detail::meta_at(meta, 2, "pam.meta");
  cfg.trunk.blocks = detail::meta_at(meta, 3, "pam.meta");
  cfg.trunk.heads = detail::meta_at(meta, 4, "pam.meta");
  cfg.trunk.ff_mult = detail::meta_at(meta, 5, "pam.meta");
  const IntTensor& parents = get_int_tensor(in, "pam.topology.parents");
  if (parents.data.size() != detail::meta_at(meta, 0, "pam.meta"))
    throw FormatError("entry 'pam.topology.parents' disagrees with the joint count in 'pam.meta'");
  LifterParams p;
  try {
    p = make_lifter(detail::topology_from_parents(parents.data), cfg, nullptr);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("entry 'pam.meta' is inconsistent: ") + e.what());
  }
  detail::take_params(in, p);
  return p;
}

inline void put_pse(TensorMap& out, const PseParams& p) {
  const PseConfig& c = p.config;
  out["pse.meta"] = IntTensor::vector(
      {static_cast<std::int64_t>(p.joints), static_cast<std::int64_t>(p.input_dim()), static_cast<std::int64_t>(c.dim),
       static_cast<std::int64_t>(c.blocks), static_cast<std::int64_t>(c.heads), static_cast<std::int64_t>(c.ff_mult),
       static_cast<std::int64_t>(c.tokens), static_cast<std::int64_t>(c.iterations), static_cast<std::int64_t>(c.hidden),
       c.source == PoseSource::features ? 0 : 1, c.tie_branch_weights ? 1 : 0});
  std::vector<std::int64_t> idx(p.template_indices.begin(), p.template_indices.end());
  out["pse.template.indices"] = IntTensor::vector(std::move(idx));
  detail::put_params(out, p);
}

inline PseParams take_pse(const TensorMap& in) {
  const IntTensor& meta = get_int_tensor(in, "pse.meta");
  auto at = [&](std::size_t i) { return detail::meta_at(meta, i, "pse.meta"); };
  PseConfig c;
  const std::size_t joints = at(0), input_dim = at(1);
  c.dim = at(2);
  c.blocks = at(3);
  c.heads = at(4);
  c.ff_mult = at(5);
  c.tokens = at(6);
  c.iterations = at(7);
  c.hidden = at(8);
  c.source = at(9) == 0 ? PoseSource::features : PoseSource::joints;
  c.tie_branch_weights = at(10) != 0;
  const IntTensor& idx = get_int_tensor(in, "pse.template.indices");
  if (idx.data.size() != c.tokens) throw FormatError("entry 'pse.template.indices' disagrees with the token count");
  std::vector<std::size_t> indices;
  std::size_t vertices = c.tokens;
  for (std::int64_t i : idx.data) {
    if (i < 0) throw FormatError("entry 'pse.template.indices' holds a negative index");
    indices.push_back(static_cast<std::size_t>(i));
    vertices = std::max(vertices, indices.back() + 1);
  }
  PseParams p;
  try {
    p = make_pse(c, joints, input_dim, vertices, nullptr);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("entry 'pse.meta' is inconsistent: ") + e.what());
  }
  if (p.input_dim() != input_dim) throw FormatError("entry 'pse.meta' input dim does not match its source mode");
  p.template_indices = std::move(indices);
  detail::take_params(in, p);
  return p;
}

inline void put_body_model(TensorMap& out, const BodyModel& m) {
  out["body.template"] = m.template_vertices;
  out["body.shape_dirs"] = m.shape_dirs;
  out["body.joint_regressor"] = m.joint_regressor;
  out["body.skin_weights"] = m.skin_weights;
  out["body.parents"] = IntTensor::vector(m.parents);
  if (!m.faces.empty()) {
    std::vector<std::int64_t> f;
    for (const auto& tri : m.faces) f.insert(f.end(), tri.begin(), tri.end());
    out["body.faces"] = IntTensor({m.faces.size(), 3}, std::move(f));
  }
}

inline bool has_body_model(const TensorMap& in) { return in.count("body.template") > 0; }

inline BodyModel take_body_model(const TensorMap& in) {
  BodyModel m;
  m.template_vertices = get_tensor(in, "body.template");
  m.shape_dirs = get_tensor(in, "body.shape_dirs");
  m.joint_regressor = get_tensor(in, "body.joint_regressor");
  m.skin_weights = get_tensor(in, "body.skin_weights");
  m.parents = get_int_tensor(in, "body.parents").data;
  if (auto it = in.find("body.faces"); it != in.end()) {
    const IntTensor& f = get_int_tensor(in, "body.faces");
    if (f.dims.size() != 2 || f.dims[1] != 3) throw FormatError("entry 'body.faces' must be F x 3");
    for (std::size_t i = 0; i < f.dims[0]; ++i) m.faces.push_back({f.data[3 * i], f.data[3 * i + 1], f.data[3 * i + 2]});
  }
  try {
    validate(m);
  } catch (const Error& e) {
    throw FormatError(std::string("stored body model is invalid: ") + e.what());
  }
  return m;
}

/// Everything the pipeline needs to run.
struct PipelineModel {
  LifterParams lifter;
  PseParams pse;
  BodyModel body;
};

inline TensorMap to_tensor_map(const PipelineModel& m) {
  TensorMap out;
  put_lifter(out, m.lifter);
  put_pse(out, m.pse);
  put_body_model(out, m.body);
  return out;
}

inline void save_pipeline(const std::filesystem::path& path, const PipelineModel& m) { save_checkpoint(path, to_tensor_map(m)); }

/// Loads a pipeline checkpoint. A checkpoint without body.* entries uses
/// the built-in desk body model.
inline PipelineModel load_pipeline(const std::filesystem::path& path) {
  const TensorMap in = load_checkpoint(path);
  PipelineModel m;
  m.lifter = take_lifter(in);
  m.pse = take_pse(in);
  m.body = has_body_model(in) ? take_body_model(in) : make_desk_body_model();
  if (m.pse.joints != m.lifter.joints())
    throw FormatError("pse joint count " + std::to_string(m.pse.joints) + " does not match the lifter's " +
                      std::to_string(m.lifter.joints()));
  for (std::size_t i : m.pse.template_indices)
    if (i >= m.body.vertex_count()) throw FormatError("entry 'pse.template.indices' exceeds the body model's vertices");
  return m;
}

}  // namespace liftmesh
