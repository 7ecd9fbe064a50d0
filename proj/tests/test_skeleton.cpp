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

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace liftmesh {
namespace {

SkeletonTopology chain(std::size_t n) {
  SkeletonTopology t;
  t.name = "chain";
  for (std::size_t i = 0; i < n; ++i) t.joint_names.push_back("j" + std::to_string(i));
  for (std::size_t i = 1; i < n; ++i) t.edges.push_back({i - 1, i});
  return t;
}

// D^-1/2 (A + I) D^-1/2 written out entry by entry.
Tensor brute_adjacency(const SkeletonTopology& t) {
  const std::size_t n = t.joint_count();
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
  for (const Edge& e : t.edges) a[e.parent][e.child] = a[e.child][e.parent] = 1.0;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a[i][j] / (std::sqrt(deg[i]) * std::sqrt(deg[j]));
  return out;
}

TEST(Adjacency, SingleJointIsSelfLoop) {
  EXPECT_EQ(build_adjacency(chain(1)), Tensor::matrix({{1.0}}));
}

TEST(Adjacency, TwoJointChain) {
  EXPECT_EQ(build_adjacency(chain(2)), Tensor::matrix({{0.5, 0.5}, {0.5, 0.5}}));
}

TEST(Adjacency, H36mMatchesBruteForce) {
  const auto t = h36m17();
  EXPECT_LT(max_abs_diff(build_adjacency(t), brute_adjacency(t)), 1e-15);
}

TEST(Adjacency, SymmetricWithSpectralRadiusAtMostOne) {
  for (const auto& [name, topo] : default_topologies()) {
    const Tensor a = build_adjacency(topo);
    EXPECT_EQ(max_abs_diff(a, transpose(a)), 0.0) << name;
    // power iteration on A^2 (positive semi-definite) gives rho(A)^2
    const Tensor a2 = matmul(a, a);
    Tensor v({a.rows(), 1}, 1.0);
    double rho2 = 0.0;
    for (int it = 0; it < 3000; ++it) {
      Tensor w = matmul(a2, v);
      double n = 0.0;
      for (double x : w.data()) n += x * x;
      n = std::sqrt(n);
      for (double& x : w.data()) x /= n;
      rho2 = n;
      v = w;
    }
    EXPECT_LE(std::sqrt(rho2), 1.0 + 1e-9) << name;
  }
}

TEST(Topology, ValidationRejectsBadTrees) {
  auto t = chain(4);
  EXPECT_NO_THROW(validate(t));
  auto cyc = t;
  cyc.edges.push_back({3, 0});
  EXPECT_THROW(validate(cyc), TopologyError);
  auto disconnected = t;
  disconnected.edges[1] = {0, 1};  // duplicate edge leaves joint 2 unreachable
  EXPECT_THROW(validate(disconnected), TopologyError);
  auto out_of_range = t;
  out_of_range.edges[0] = {0, 9};
  EXPECT_THROW(validate(out_of_range), TopologyError);
  auto self = t;
  self.edges[0] = {1, 1};
  EXPECT_THROW(validate(self), TopologyError);
  auto bad_root = t;
  bad_root.root = 7;
  EXPECT_THROW(validate(bad_root), TopologyError);
}

TEST(Topology, ShippedDefaults) {
  const auto h = find_topology("h36m17");
  EXPECT_EQ(h.joint_count(), 17u);
  EXPECT_EQ(h.joint_names[h.root], "pelvis");
  EXPECT_EQ(find_topology("coco17").joint_count(), 17u);
  EXPECT_THROW(find_topology("unknown"), NotFoundError);
  for (const auto& [name, topo] : default_topologies()) EXPECT_NO_THROW(validate(topo)) << name;
}

TEST(Topology, SerializationRoundTrips) {
  for (const auto& [name, topo] : default_topologies()) {
    const std::string text = serialize_topology(topo);
    EXPECT_EQ(parse_topology(text), topo) << name;
    EXPECT_EQ(serialize_topology(parse_topology(text)), text);
  }
}

TEST(Topology, ParseReportsMissingKeys) {
  EXPECT_THROW(parse_topology("topology.name=x\n"), ConfigError);
  EXPECT_THROW(parse_topology("topology.name=x\ntopology.joints=a,b\ntopology.edges=0-q\ntopology.root=0\n"),
               ConfigError);
}

TEST(Pose, ConstructionChecksShape) {
  EXPECT_THROW(make_pose2d(Tensor({17, 3})), ContractViolation);
  EXPECT_THROW(make_pose2d(Tensor({17, 2}), std::vector<double>(3, 1.0)), ContractViolation);
  EXPECT_THROW(make_pose3d(Tensor({17, 2})), ContractViolation);
  Tensor nan({2, 2});
  nan[0] = std::nan("");
  EXPECT_THROW(make_pose2d(nan), ContractViolation);
}

TEST(CocoMapping, PelvisIsHipMidpoint) {
  Tensor c({17, 2});
  c(11, 0) = 0.0;
  c(12, 0) = 2.0;
  const Pose2D h = map_coco_to_h36m(make_pose2d(c));
  EXPECT_EQ(h.coords(0, 0), 1.0);
  EXPECT_EQ(h.coords(0, 1), 0.0);
}

TEST(CocoMapping, OriginStaysAtOrigin) {
  const Pose2D h = map_coco_to_h36m(make_pose2d(Tensor({17, 2})));
  EXPECT_EQ(h.coords, Tensor({17, 2}));
  EXPECT_TRUE(h.confidence.empty());
}

TEST(CocoMapping, RandomPoseMatchesIndexTable) {
  Rng rng(11);
  const Tensor c = rng.uniform_tensor({17, 2}, 0.0, 640.0);
  std::vector<double> conf(17);
  for (double& v : conf) v = rng.uniform();
  const Pose2D h = map_coco_to_h36m(make_pose2d(c, conf));
  auto p = [&](std::size_t i, int k) { return c(i, k); };
  for (int k = 0; k < 2; ++k) {
    const double hips = (p(11, k) + p(12, k)) / 2, shoulders = (p(5, k) + p(6, k)) / 2;
    const double expected[17] = {hips,     p(12, k), p(14, k), p(16, k), p(11, k), p(13, k),
                                 p(15, k), (hips + shoulders) / 2, (hips + 2 * shoulders) / 3, shoulders,
                                 (p(1, k) + p(2, k)) / 2, p(5, k), p(7, k), p(9, k), p(6, k), p(8, k), p(10, k)};
    for (int j = 0; j < 17; ++j) EXPECT_NEAR(h.coords(j, k), expected[j], 1e-12) << "joint " << j;
  }
  EXPECT_EQ(h.confidence[0], std::min(conf[11], conf[12]));
  EXPECT_EQ(h.confidence[9], std::min(conf[5], conf[6]));
  EXPECT_EQ(h.confidence[3], conf[16]);
  EXPECT_EQ(h.confidence[7], std::min({conf[11], conf[12], conf[5], conf[6]}));
}

}  // namespace
}  // namespace liftmesh
