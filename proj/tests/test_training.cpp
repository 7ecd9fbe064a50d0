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
#include <cstdlib>
#include <limits>

#include "test_support.hpp"

namespace liftmesh {
namespace {

struct Toy {
  BodyModel body = make_desk_body_model();
  LifterParams lifter;
  PseParams pse;

  explicit Toy(std::uint64_t seed, PoseSource source = PoseSource::features) {
    Rng rng(seed);
    LifterConfig lc;
    lc.trunk = {8, 2, 1, 1, 2};
    lifter = make_lifter(find_topology("h36m17"), lc, &rng);
    PseConfig pc;
    pc.dim = 8;
    pc.heads = 1;
    pc.tokens = 4;
    pc.hidden = 16;
    pc.source = source;
    pse = make_pse(pc, 17, 8, body.vertex_count(), &rng);
  }
};

TrainConfig short_run(TrainMode mode, std::size_t steps = 5) {
  TrainConfig c;
  c.mode = mode;
  c.steps = steps;
  c.batch_size = 4;
  c.lr = 1e-2;
  return c;
}

std::vector<std::uint8_t> bytes_of(const Toy& t) {
  std::vector<std::uint8_t> out;
  auto add = [&](const std::string&, const Tensor& x) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(x.data().data());
    out.insert(out.end(), p, p + x.size() * sizeof(double));
  };
  t.lifter.visit(add);
  t.pse.visit(add);
  return out;
}

TEST(Loss, ZeroWhenPredictionMatchesTarget) {
  const BodyModel m = make_desk_body_model();
  const SynthSample s = make_synth_dataset(1, m, 3)[0];
  const PredictionValues p{s.gt_joints3d, s.gt_cam.to_vector(), s.gt_beta, s.gt_theta, s.gt_vertices};
  EXPECT_EQ(total_loss(p, s, LossWeights{}, LossKind::l1), 0.0);
  EXPECT_EQ(total_loss(p, s, LossWeights{}, LossKind::l2), 0.0);
}

TEST(Loss, UnitOffsetOnOneCoordinate) {
  const BodyModel m = make_desk_body_model();
  const SynthSample s = make_synth_dataset(1, m, 4)[0];
  Tensor j = s.gt_joints3d;
  j(5, 2) += 1.0;
  LossWeights w{1.0, 0.0, 0.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(total_loss({j, {}, {}, {}, {}}, s, w, LossKind::l1), 1.0 / 51.0);
  EXPECT_DOUBLE_EQ(total_loss({j, {}, {}, {}, {}}, s, w, LossKind::l2), 1.0 / 51.0);
}

TEST(Loss, WeightedSumOfL1Terms) {
  const BodyModel m = make_desk_body_model();
  Rng rng(5);
  const SynthSample s = make_synth_dataset(1, m, 5)[0];
  const Tensor j = rng.normal_tensor({17, 3}), c = Tensor::vector({1.1, 0.02, -0.03}), b = rng.normal_tensor({10}),
               th = rng.normal_tensor({24, 3}), v = rng.normal_tensor({120, 3});
  auto l1 = [](const Tensor& a, const Tensor& t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - t[i]);
    return acc / static_cast<double>(a.size());
  };
  Tensor proj({17, 2});
  for (std::size_t k = 0; k < 17; ++k) {
    proj(k, 0) = c[0] * j(k, 0) + c[1];
    proj(k, 1) = c[0] * j(k, 1) + c[2];
  }
  const LossWeights w{1.0, 0.5, 1.0, 0.1, 0.5};
  const double expected = 1.0 * l1(j, s.gt_joints3d) + 0.5 * l1(proj, s.pose2d) + 1.0 * l1(th, s.gt_theta) +
                          0.1 * l1(b, s.gt_beta) + 0.5 * l1(v, s.gt_vertices);
  EXPECT_NEAR(total_loss({j, c, b, th, v}, s, w, LossKind::l1), expected, 1e-12);
}

TEST(Loss, MissingPredictionWithWeightIsAnError) {
  const BodyModel m = make_desk_body_model();
  const SynthSample s = make_synth_dataset(1, m, 6)[0];
  EXPECT_THROW(total_loss({s.gt_joints3d, {}, {}, {}, {}}, s, LossWeights{}, LossKind::l1), ContractViolation);
  EXPECT_NO_THROW(total_loss({s.gt_joints3d, {}, {}, {}, {}}, s, {1, 0, 0, 0, 0}, LossKind::l1));
}

TEST(Loss, EndToEndGradient) {
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    Toy toy(10 + seed);
    const SynthSample s = make_synth_dataset(1, toy.body, 20 + seed)[0];
    Rng rng(30 + seed);
    for (auto& b : toy.pse.pose_blocks) testing::jitter(b, rng);
    toy.pse.reg_w2 = rng.normal_tensor(toy.pse.reg_w2.dims(), 0.1);
    ParamFunction f = [&](ad::Tape& t, ad::Binder& b) {
      const auto v = ad::full_pipeline(t.constant(s.pose2d), toy.lifter, toy.pse, toy.body, b, b);
      ad::Prediction p{v.lifter.joints3d, v.lifter.camera, v.lifter.shape, v.theta(), v.mesh.vertices};
      return ad::total_loss(p, s, LossWeights{}, LossKind::l2, t);
    };
    std::vector<Tensor*> params = testing::param_ptrs(toy.lifter);
    for (Tensor* p : testing::param_ptrs(toy.pse)) params.push_back(p);
    EXPECT_LT(finite_diff_check_params(f, params, 0.0, 200, seed), 1e-4);
  }
}

TEST(Adam, OneStepHandOracle) {
  Tensor w = Tensor::vector({1.0, -2.0});
  NamedParams params{{"w", &w}};
  AdamState st;
  TrainConfig c;
  c.lr = 0.1;
  adam_step(params, {{"w", Tensor::vector({0.5, -4.0})}}, st, c);
  // bias-corrected first step moves each coordinate by lr * g / (|g| + eps)
  EXPECT_NEAR(w[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(w[1], -2.0 + 0.1 * 4.0 / (4.0 + 1e-8), 1e-15);
  EXPECT_NEAR(st.m["w"][0], 0.05, 1e-15);
  EXPECT_NEAR(st.v["w"][1], 0.016, 1e-15);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, ZeroGradientDecaysMoments) {
  Tensor w = Tensor::vector({1.0});
  NamedParams params{{"w", &w}};
  AdamState st;
  TrainConfig c;
  adam_step(params, {{"w", Tensor::vector({2.0})}}, st, c);
  const double m1 = st.m["w"][0], v1 = st.v["w"][0];
  adam_step(params, {{"w", Tensor::vector({0.0})}}, st, c);
  EXPECT_DOUBLE_EQ(st.m["w"][0], 0.9 * m1);
  EXPECT_DOUBLE_EQ(st.v["w"][0], 0.999 * v1);
}

TEST(Adam, TwoStepsMatchManualRecurrence) {
  Tensor w = Tensor::vector({0.3});
  NamedParams params{{"w", &w}};
  AdamState st;
  TrainConfig c;
  c.lr = 0.05;
  const double g1 = 1.5, g2 = -0.7;
  adam_step(params, {{"w", Tensor::vector({g1})}}, st, c);
  adam_step(params, {{"w", Tensor::vector({g2})}}, st, c);
  double x = 0.3, m = 0, v = 0;
  int t = 0;
  for (double g : {g1, g2}) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_DOUBLE_EQ(w[0], x);
}

TEST(Adam, ParamsWithoutGradientAreUntouched) {
  Tensor a = Tensor::vector({1.0}), b = Tensor::vector({2.0});
  AdamState st;
  adam_step({{"a", &a}, {"b", &b}}, {{"a", Tensor::vector({1.0})}}, st, TrainConfig{});
  EXPECT_NE(a[0], 1.0);
  EXPECT_EQ(b[0], 2.0);
}

TEST(Synth, DeterministicAndExactlyProjected) {
  const BodyModel m = make_desk_body_model();
  const auto a = make_synth_dataset(8, m, 7), b = make_synth_dataset(8, m, 7), c = make_synth_dataset(8, m, 8);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(a[i].gt_theta, b[i].gt_theta);
    EXPECT_EQ(a[i].pose2d, b[i].pose2d);
    EXPECT_EQ(a[i].pose2d, weak_perspective_project(a[i].gt_joints3d, a[i].gt_cam));
    EXPECT_EQ(a[i].gt_joints3d(0, 0), 0.0);
    EXPECT_EQ(a[i].gt_vertices, forward_kinematics_lbs(m, a[i].gt_theta, a[i].gt_beta).vertices);
  }
  EXPECT_NE(a[0].gt_theta, c[0].gt_theta);
  const auto noisy = make_synth_dataset(8, m, 7, 0.01);
  EXPECT_EQ(noisy[0].gt_theta, a[0].gt_theta);
  EXPECT_GT(max_abs_diff(noisy[0].pose2d, a[0].pose2d), 0.0);
}

TEST(Config, ValidationAndModeWeights) {
  TrainConfig c;
  EXPECT_NO_THROW(validate(c));
  c.lr = -1.0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.weights.theta = -0.1;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.steps = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.mode = TrainMode::lifter_only;
  EXPECT_EQ(effective_weights(c).theta, 0.0);
  EXPECT_EQ(effective_weights(c).vertices, 0.0);
  EXPECT_EQ(effective_weights(c).joints3d, 1.0);
  c.mode = TrainMode::pse_only;
  EXPECT_EQ(effective_weights(c).joints3d, 0.0);
  EXPECT_EQ(effective_weights(c).reproj, 0.0);
  EXPECT_EQ(effective_weights(c).beta, 0.0);
  EXPECT_EQ(effective_weights(c).theta, 1.0);
  EXPECT_EQ(parse_train_mode("end-to-end"), TrainMode::end_to_end);
  EXPECT_THROW(parse_train_mode("both"), ConfigError);
  EXPECT_THROW(parse_loss_kind("huber"), ConfigError);
}

TEST(Loop, ZeroLearningRateLeavesParametersAndFlatCurve) {
  Toy toy(40);
  const auto before = bytes_of(toy);
  const auto data = make_synth_dataset(4, toy.body, 41);
  TrainConfig c = short_run(TrainMode::end_to_end, 4);
  c.lr = 0.0;
  const TrainResult r = train_loop(c, data, toy.lifter, toy.pse, toy.body);
  EXPECT_EQ(bytes_of(toy), before);
  ASSERT_EQ(r.curve.size(), 4u);
  // every step sees the whole set, only the summation order changes
  for (const auto& rec : r.curve) EXPECT_NEAR(rec.loss, r.curve[0].loss, 1e-12);
}

TEST(Loop, LifterOnlyLeavesEstimatorUntouched) {
  Toy toy(42);
  std::vector<std::uint8_t> pse_before;
  toy.pse.visit([&](const std::string&, const Tensor& x) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(x.data().data());
    pse_before.insert(pse_before.end(), p, p + x.size() * sizeof(double));
  });
  const Tensor lifter_w = toy.lifter.input_proj;
  train_loop(short_run(TrainMode::lifter_only), make_synth_dataset(4, toy.body, 43), toy.lifter, toy.pse, toy.body);
  std::vector<std::uint8_t> pse_after;
  toy.pse.visit([&](const std::string&, const Tensor& x) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(x.data().data());
    pse_after.insert(pse_after.end(), p, p + x.size() * sizeof(double));
  });
  EXPECT_EQ(pse_after, pse_before);
  EXPECT_NE(toy.lifter.input_proj, lifter_w);
}

TEST(Loop, PseOnlyLeavesLifterUntouched) {
  for (PoseSource src : {PoseSource::features, PoseSource::joints}) {
    Toy toy(44, src);
    const Tensor lifter_w = toy.lifter.input_proj, reg = toy.pse.reg_w2;
    const TrainResult r =
        train_loop(short_run(TrainMode::pse_only), make_synth_dataset(4, toy.body, 45), toy.lifter, toy.pse, toy.body);
    EXPECT_EQ(toy.lifter.input_proj, lifter_w);
    EXPECT_NE(toy.pse.reg_w2, reg);
    EXPECT_TRUE(std::isfinite(r.curve.back().mpjpe_mm));
  }
}

TEST(Loop, NonFiniteLossRaises) {
  Toy toy(46);
  auto data = make_synth_dataset(2, toy.body, 47);
  for (auto& s : data) s.gt_joints3d(3, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    train_loop(short_run(TrainMode::lifter_only), data, toy.lifter, toy.pse, toy.body);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos);
  }
}

TEST(Loop, RejectsNonH36mLifter) {
  Toy toy(48);
  Rng rng(49);
  LifterParams coco = make_lifter(find_topology("coco17"), toy.lifter.config, &rng);
  coco.topology.joint_names.pop_back();
  coco.topology.joint_names.push_back("extra");
  EXPECT_NO_THROW(train_loop(short_run(TrainMode::lifter_only, 1), make_synth_dataset(2, toy.body, 1), coco, toy.pse,
                             toy.body));
  LifterParams small = make_lifter(find_topology("h36m17"), toy.lifter.config, &rng);
  small.topology.joint_names.pop_back();
  EXPECT_THROW(train_loop(short_run(TrainMode::lifter_only, 1), make_synth_dataset(2, toy.body, 1), small, toy.pse,
                          toy.body),
               ConfigError);
}

TEST(Loop, IndependentOfWorkerCount) {
  const auto run = [](const char* threads) {
    setenv("LIFTMESH_THREADS", threads, 1);
    Toy toy(50);
    const TrainResult r =
        train_loop(short_run(TrainMode::end_to_end, 3), make_synth_dataset(6, toy.body, 51), toy.lifter, toy.pse, toy.body);
    unsetenv("LIFTMESH_THREADS");
    return std::make_pair(bytes_of(toy), r.curve.back().loss);
  };
  const auto a = run("1"), b = run("3"), c = run("1");
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_EQ(a.first, c.first);
}

TEST(Loop, HookFiresAtCheckpointInterval) {
  Toy toy(52);
  TrainConfig c = short_run(TrainMode::lifter_only, 7);
  c.checkpoint_every = 3;
  std::vector<std::size_t> seen;
  train_loop(c, make_synth_dataset(4, toy.body, 53), toy.lifter, toy.pse, toy.body,
             [&](std::size_t s) { seen.push_back(s); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{3, 6}));
}

// Short lifter-only run on a handful of samples: the median of the last
// curve entries sits well below the starting error.
TEST(Loop, LifterOnlyFitsSmallSet) {
  Toy toy(54);
  const auto data = make_synth_dataset(4, toy.body, 55);
  TrainConfig c = short_run(TrainMode::lifter_only, 150);
  const double before = lifter_mpjpe_mm(data, toy.lifter);
  const TrainResult r = train_loop(c, data, toy.lifter, toy.pse, toy.body);
  EXPECT_DOUBLE_EQ(r.curve.front().mpjpe_mm, before);
  std::vector<double> tail;
  for (std::size_t i = r.curve.size() - 21; i < r.curve.size(); ++i) tail.push_back(r.curve[i].mpjpe_mm);
  std::nth_element(tail.begin(), tail.begin() + 10, tail.end());
  EXPECT_LT(tail[10], 0.5 * before);
  EXPECT_LT(lifter_mpjpe_mm(data, toy.lifter), 0.5 * before);
}

}  // namespace
}  // namespace liftmesh
