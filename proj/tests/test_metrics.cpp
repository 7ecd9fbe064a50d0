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

Similarity random_similarity(Rng& rng) {
  Similarity s;
  s.scale = rng.uniform(0.3, 3.0);
  const Tensor r = rodrigues(rng.uniform_tensor({3}, -3.0, 3.0));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s.rotation[i][j] = r(i, j);
  for (double& t : s.translation) t = rng.uniform(-2.0, 2.0);
  return s;
}

double squared_residual(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

Pose3D random_pose3d(Rng& rng, std::size_t j = 17) { return make_pose3d(rng.normal_tensor({j, 3})); }

TEST(Mpjpe, IdenticalIsZero) {
  Rng rng(101);
  const Pose3D p = random_pose3d(rng);
  EXPECT_EQ(mpjpe(p, p), 0.0);
}

TEST(Mpjpe, ConstantOffsetIsRemoved) {
  Rng rng(102);
  const Pose3D g = random_pose3d(rng);
  Tensor c = g.coords;
  for (std::size_t j = 0; j < 17; ++j) c(j, 0) += 5.0;
  EXPECT_NEAR(mpjpe(make_pose3d(c), g), 0.0, 1e-12);
}

TEST(Mpjpe, SingleThreeFourFiveJoint) {
  Tensor g({17, 3});
  Tensor p = g;
  p(4, 0) = 3.0;
  p(4, 1) = 4.0;
  EXPECT_EQ(mpjpe(make_pose3d(p), make_pose3d(g)), 5.0 / 17.0);
}

TEST(Mpjpe, JointMismatchIsRejected) {
  EXPECT_THROW(mpjpe(make_pose3d(Tensor({17, 3})), make_pose3d(Tensor({16, 3}))), ContractViolation);
}

TEST(Procrustes, IdenticalGivesIdentityTransform) {
  Rng rng(103);
  const Pose3D p = random_pose3d(rng);
  const Similarity s = procrustes_align(p, p);
  EXPECT_NEAR(s.scale, 1.0, 1e-12);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(s.translation[i], 0.0, 1e-12);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(s.rotation[i][j], i == j ? 1.0 : 0.0, 1e-12);
  }
}

TEST(Procrustes, UndoesQuarterTurnAboutZ) {
  Rng rng(104);
  const Pose3D g = random_pose3d(rng);
  Tensor p = g.coords;
  for (std::size_t j = 0; j < 17; ++j) {
    p(j, 0) = -g.coords(j, 1);
    p(j, 1) = g.coords(j, 0);
  }
  const Similarity s = procrustes_align(make_pose3d(p), g);
  // inverse of the +90 degree turn
  EXPECT_NEAR(s.rotation[0][1], 1.0, 1e-9);
  EXPECT_NEAR(s.rotation[1][0], -1.0, 1e-9);
  EXPECT_NEAR(s.rotation[2][2], 1.0, 1e-9);
  EXPECT_LT(max_abs_diff(s.apply(p), g.coords), 1e-9);
}

TEST(Procrustes, RecoversPlantedSimilarity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(105 + seed);
    const Pose3D g = random_pose3d(rng);
    Similarity planted = random_similarity(rng);
    planted.scale = 0.7;
    const Tensor p = planted.apply(g.coords);
    const Similarity s = procrustes_align(make_pose3d(p), g);
    EXPECT_NEAR(s.scale, 1.0 / 0.7, 1e-9);
    EXPECT_LT(max_abs_diff(s.apply(p), g.coords), 1e-9);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(s.rotation[i][j], planted.rotation[j][i], 1e-9);
  }
}

TEST(Procrustes, RotationIsProper) {
  Rng rng(106);
  for (int n = 0; n < 500; ++n) {
    const Similarity s = procrustes_align(random_pose3d(rng), random_pose3d(rng));
    double det = 0.0;
    for (int c = 0; c < 3; ++c)
      det += s.rotation[0][c] * (s.rotation[1][(c + 1) % 3] * s.rotation[2][(c + 2) % 3] -
                                 s.rotation[1][(c + 2) % 3] * s.rotation[2][(c + 1) % 3]);
    EXPECT_NEAR(det, 1.0, 1e-9);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double d = 0.0;
        for (int k = 0; k < 3; ++k) d += s.rotation[k][i] * s.rotation[k][j];
        EXPECT_NEAR(d, i == j ? 1.0 : 0.0, 1e-9);
      }
  }
}

TEST(Procrustes, NoSampledSimilarityDoesBetter) {
  Rng rng(107);
  for (int pair = 0; pair < 5; ++pair) {
    const Pose3D p = random_pose3d(rng), g = random_pose3d(rng);
    const Similarity best = procrustes_align(p, g);
    const double r0 = squared_residual(best.apply(p.coords), g.coords);
    for (int n = 0; n < 2000; ++n) {
      // half global samples, half small perturbations of the optimum
      Similarity s = random_similarity(rng);
      if (n % 2) {
        s = best;
        s.scale *= 1.0 + rng.uniform(-0.05, 0.05);
        const Tensor d = rodrigues(rng.uniform_tensor({3}, -0.05, 0.05));
        Mat3 r{};
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[i][j] += d(i, k) * best.rotation[k][j];
        s.rotation = r;
        for (double& t : s.translation) t += rng.uniform(-0.05, 0.05);
      }
      EXPECT_GE(squared_residual(s.apply(p.coords), g.coords), r0 - 1e-9);
    }
  }
}

TEST(Procrustes, DegenerateInputs) {
  Rng rng(108);
  EXPECT_THROW(procrustes_align(make_pose3d(Tensor({17, 3})), random_pose3d(rng)), AlignmentError);
  EXPECT_THROW(procrustes_align(random_pose3d(rng), make_pose3d(Tensor({17, 3}))), AlignmentError);
  EXPECT_THROW(procrustes_align(random_pose3d(rng, 2), random_pose3d(rng, 2)), ContractViolation);
}

TEST(PaMpjpe, NeverExceedsMpjpe) {
  Rng rng(109);
  for (int n = 0; n < 1000; ++n) {
    const Pose3D p = random_pose3d(rng), g = random_pose3d(rng);
    EXPECT_LE(pa_mpjpe(p, g), mpjpe(p, g) + 1e-9);
  }
}

TEST(PaMpjpe, SimilarityCopiesAreZeroAndInvariant) {
  Rng rng(110);
  for (int n = 0; n < 200; ++n) {
    const Pose3D g = random_pose3d(rng), x = random_pose3d(rng);
    EXPECT_EQ(pa_mpjpe(g, g), 0.0);
    EXPECT_NEAR(pa_mpjpe(make_pose3d(random_similarity(rng).apply(g.coords)), g), 0.0, 1e-9);
    EXPECT_NEAR(pa_mpjpe(make_pose3d(random_similarity(rng).apply(x.coords)), g), pa_mpjpe(x, g), 1e-9);
  }
}

TEST(Mpve, Examples) {
  Rng rng(111);
  const Tensor g = rng.normal_tensor({120, 3});
  EXPECT_EQ(mpve(g, g), 0.0);
  Tensor shifted = g;
  for (std::size_t v = 0; v < 120; ++v) {
    shifted(v, 0) += 0.3;
    shifted(v, 2) -= 1.1;
  }
  EXPECT_NEAR(mpve(shifted, g), 0.0, 1e-12);
  Tensor bumped = g;
  bumped(57, 1) += 10.0;
  EXPECT_NEAR(mpve(bumped, g), 10.0 / 120.0, 1e-12);
  EXPECT_THROW(mpve(g, Tensor({119, 3})), ContractViolation);
}

TEST(Evaluate, AggregatesAreMeansInOrder) {
  Rng rng(112);
  std::vector<Pose3D> preds, gts;
  std::vector<Tensor> mp, mg;
  for (int n = 0; n < 7; ++n) {
    preds.push_back(random_pose3d(rng));
    gts.push_back(random_pose3d(rng));
    mp.push_back(rng.normal_tensor({30, 3}));
    mg.push_back(rng.normal_tensor({30, 3}));
  }
  const EvalReport r = evaluate(preds, gts, mp, mg);
  EXPECT_EQ(r.n_samples, 7u);
  double a = 0, b = 0, c = 0;
  for (int n = 0; n < 7; ++n) {
    a += mpjpe(preds[n], gts[n]);
    b += pa_mpjpe(preds[n], gts[n]);
    c += mpve(mp[n], mg[n]);
    EXPECT_LE(r.per_sample_pa_mpjpe[n], r.per_sample_mpjpe[n] + 1e-9);
  }
  EXPECT_DOUBLE_EQ(r.mpjpe_mm, a / 7);
  EXPECT_DOUBLE_EQ(r.pa_mpjpe_mm, b / 7);
  ASSERT_TRUE(r.mpve_mm.has_value());
  EXPECT_DOUBLE_EQ(*r.mpve_mm, c / 7);
  EXPECT_LE(r.pa_mpjpe_mm, r.mpjpe_mm + 1e-9);

  std::vector<Pose3D> rp(preds.rbegin(), preds.rend()), rg(gts.rbegin(), gts.rend());
  EXPECT_NEAR(evaluate(rp, rg).mpjpe_mm, r.mpjpe_mm, 1e-12);
  EXPECT_FALSE(evaluate(rp, rg).mpve_mm.has_value());
  EXPECT_NE(r.to_key_value().find("mpve_mm="), std::string::npos);
  EXPECT_EQ(evaluate(std::vector<Pose3D>{}, std::vector<Pose3D>{}).n_samples, 0u);
  preds.pop_back();
  EXPECT_THROW(evaluate(preds, gts), ContractViolation);
}

}  // namespace
}  // namespace liftmesh
