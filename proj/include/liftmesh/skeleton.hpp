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
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "liftmesh/core/tensor.hpp"

namespace liftmesh {

struct Edge {
  std::size_t parent;
  std::size_t child;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Joint graph of a skeleton. Edges must form a tree rooted at `root`.
struct SkeletonTopology {
  std::string name;
  std::vector<std::string> joint_names;
  std::vector<Edge> edges;
  std::size_t root = 0;

  std::size_t joint_count() const { return joint_names.size(); }

  std::optional<std::size_t> index_of(const std::string& joint) const {
    auto it = std::find(joint_names.begin(), joint_names.end(), joint);
    if (it == joint_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - joint_names.begin());
  }

  friend bool operator==(const SkeletonTopology&, const SkeletonTopology&) = default;
};

inline void validate(const SkeletonTopology& topo) {
  const std::size_t j = topo.joint_count();
  const std::string who = "topology '" + topo.name + "': ";
  if (j == 0) throw TopologyError(who + "no joints");
  if (topo.root >= j) throw TopologyError(who + "root index out of range");
  if (topo.edges.size() != j - 1)
    throw TopologyError(who + "a tree over " + std::to_string(j) + " joints needs " + std::to_string(j - 1) +
                        " edges, got " + std::to_string(topo.edges.size()));
  std::vector<std::vector<std::size_t>> adj(j);
  for (const Edge& e : topo.edges) {
    if (e.parent >= j || e.child >= j) throw TopologyError(who + "edge index out of range");
    if (e.parent == e.child) throw TopologyError(who + "self edge");
    adj[e.parent].push_back(e.child);
    adj[e.child].push_back(e.parent);
  }
  std::vector<bool> seen(j, false);
  std::vector<std::size_t> stack{topo.root};
  seen[topo.root] = true;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    for (std::size_t m : adj[n])
      if (!seen[m]) {
        seen[m] = true;
        ++visited;
        stack.push_back(m);
      }
  }
  // J-1 edges + connected => acyclic.
  if (visited != j) throw TopologyError(who + "edges do not connect all joints");
}

/// Symmetric normalised adjacency D^-1/2 (A + I) D^-1/2.
inline Tensor build_adjacency(const SkeletonTopology& topo) {
  validate(topo);
  const std::size_t j = topo.joint_count();
  Tensor a = Tensor::identity(j);
  for (const Edge& e : topo.edges) {
    a(e.parent, e.child) = 1.0;
    a(e.child, e.parent) = 1.0;
  }
  std::vector<double> deg(j, 0.0);
  for (std::size_t r = 0; r < j; ++r)
    for (std::size_t c = 0; c < j; ++c) deg[r] += a(r, c);
  for (std::size_t r = 0; r < j; ++r)
    for (std::size_t c = 0; c < j; ++c) a(r, c) /= std::sqrt(deg[r] * deg[c]);
  return a;
}

// Normalised adjacency of a graph with self loops only (the identity).
inline Tensor self_loop_adjacency(std::size_t n) { return Tensor::identity(n); }

inline SkeletonTopology h36m17() {
  return SkeletonTopology{
      "h36m17",
      {"pelvis", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle", "spine", "thorax", "neck", "head",
       "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist"},
      {{0, 1}, {1, 2}, {2, 3}, {0, 4}, {4, 5}, {5, 6}, {0, 7}, {7, 8}, {8, 9}, {9, 10}, {8, 11}, {11, 12},
       {12, 13}, {8, 14}, {14, 15}, {15, 16}},
      0};
}

// COCO's drawing skeleton has cycles; this is a spanning tree of it rooted at the nose.
inline SkeletonTopology coco17() {
  return SkeletonTopology{
      "coco17",
      {"nose", "l_eye", "r_eye", "l_ear", "r_ear", "l_shoulder", "r_shoulder", "l_elbow", "r_elbow", "l_wrist",
       "r_wrist", "l_hip", "r_hip", "l_knee", "r_knee", "l_ankle", "r_ankle"},
      {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {0, 5}, {0, 6}, {5, 7}, {7, 9}, {6, 8}, {8, 10}, {5, 11}, {6, 12},
       {11, 13}, {13, 15}, {12, 14}, {14, 16}},
      0};
}

inline std::map<std::string, SkeletonTopology> default_topologies() {
  return {{"h36m17", h36m17()}, {"coco17", coco17()}};
}

inline SkeletonTopology find_topology(const std::string& name) {
  auto all = default_topologies();
  auto it = all.find(name);
  if (it == all.end()) throw NotFoundError("unknown topology '" + name + "'");
  return it->second;
}

/// 2D joints, J x 2, with optional per-joint confidence in [0, 1].
struct Pose2D {
  Tensor coords;
  std::vector<double> confidence;

  std::size_t joint_count() const { return coords.rows(); }
};

/// 3D joints, J x 3.
struct Pose3D {
  Tensor coords;

  std::size_t joint_count() const { return coords.rows(); }
};

inline Pose2D make_pose2d(Tensor coords, std::vector<double> confidence = {}) {
  require(coords.rank() == 2 && coords.cols() == 2, "Pose2D coords must be J x 2, got " + to_string(coords.dims()));
  require(coords.all_finite(), "Pose2D coords must be finite");
  require(confidence.empty() || confidence.size() == coords.rows(), "Pose2D confidence length must equal J");
  return Pose2D{std::move(coords), std::move(confidence)};
}

inline Pose3D make_pose3d(Tensor coords) {
  require(coords.rank() == 2 && coords.cols() == 3, "Pose3D coords must be J x 3, got " + to_string(coords.dims()));
  require(coords.all_finite(), "Pose3D coords must be finite");
  return Pose3D{std::move(coords)};
}

/// COCO-17 keypoints to the h36m17 joint order. Joints with no COCO
/// counterpart are means of their sources; every output joint carries the
/// minimum confidence over its sources.
inline Pose2D map_coco_to_h36m(const Pose2D& coco) {
  require(coco.joint_count() == 17 && coco.coords.cols() == 2, "map_coco_to_h36m expects 17 COCO joints");
  // Source COCO joints averaged for each h36m17 joint.
  static const std::vector<std::vector<std::size_t>> sources = {
      {11, 12},          // pelvis
      {12},              // r_hip
      {14},              // r_knee
      {16},              // r_ankle
      {11},              // l_hip
      {13},              // l_knee
      {15},              // l_ankle
      {11, 12, 5, 6},          // spine: halfway from pelvis to the shoulder midpoint
      {11, 12, 5, 6, 5, 6},    // thorax: two thirds of the way
      {5, 6},                  // neck: shoulder midpoint
      {1, 2},                  // head: eye midpoint
      {5},  {7},  {9},   // left arm
      {6},  {8},  {10},  // right arm
  };
  Tensor out({17, 2});
  std::vector<double> conf;
  if (!coco.confidence.empty()) conf.assign(17, 1.0);
  for (std::size_t j = 0; j < 17; ++j) {
    for (std::size_t s : sources[j]) {
      out(j, 0) += coco.coords(s, 0);
      out(j, 1) += coco.coords(s, 1);
      if (!conf.empty()) conf[j] = std::min(conf[j], coco.confidence[s]);
    }
    out(j, 0) /= static_cast<double>(sources[j].size());
    out(j, 1) /= static_cast<double>(sources[j].size());
  }
  return Pose2D{std::move(out), std::move(conf)};
}

/// Topology as flat key=value lines, the same dialect as the config file.
inline std::string serialize_topology(const SkeletonTopology& topo) {
  std::ostringstream os;
  os << "topology.name=" << topo.name << '\n';
  os << "topology.joints=";
  for (std::size_t i = 0; i < topo.joint_names.size(); ++i) os << (i ? "," : "") << topo.joint_names[i];
  os << "\ntopology.edges=";
  for (std::size_t i = 0; i < topo.edges.size(); ++i)
    os << (i ? "," : "") << topo.edges[i].parent << '-' << topo.edges[i].child;
  os << "\ntopology.root=" << topo.root << '\n';
  return os.str();
}

inline SkeletonTopology parse_topology(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError("topology definition is missing '" + k + "'");
    return it->second;
  };
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep))
      if (!cur.empty()) parts.push_back(cur);
    return parts;
  };
  SkeletonTopology topo;
  topo.name = get("topology.name");
  topo.joint_names = split(get("topology.joints"), ',');
  try {
    for (const std::string& e : split(get("topology.edges"), ',')) {
      const auto dash = e.find('-');
      if (dash == std::string::npos) throw ConfigError("bad edge '" + e + "'");
      topo.edges.push_back({std::stoul(e.substr(0, dash)), std::stoul(e.substr(dash + 1))});
    }
    topo.root = std::stoul(get("topology.root"));
  } catch (const std::logic_error&) {
    throw ConfigError("topology '" + topo.name + "' has a non-numeric edge or root");
  }
  validate(topo);
  return topo;
}

inline SkeletonTopology parse_topology(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return parse_topology(kv);
}

}  // namespace liftmesh
