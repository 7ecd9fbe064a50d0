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
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "liftmesh/camera.hpp"
#include "liftmesh/metrics.hpp"
#include "liftmesh/pose_shape_estimator.hpp"

namespace liftmesh {

inline constexpr double kMillimetersPerMeter = 1000.0;

enum class TrainMode { lifter_only, pse_only, end_to_end };
enum class LossKind { l1, l2 };

inline std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::lifter_only: return "lifter-only";
    case TrainMode::pse_only: return "pse-only";
    default: return "end-to-end";
  }
}

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "lifter-only") return TrainMode::lifter_only;
  if (s == "pse-only") return TrainMode::pse_only;
  if (s == "end-to-end") return TrainMode::end_to_end;
  throw ConfigError("unknown training mode '" + s + "' (expected lifter-only|pse-only|end-to-end)");
}

inline std::string to_string(LossKind k) { return k == LossKind::l1 ? "l1" : "l2"; }

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "l1") return LossKind::l1;
  if (s == "l2") return LossKind::l2;
  throw ConfigError("unknown loss '" + s + "' (expected l1|l2)");
}

struct LossWeights {
  double joints3d = 1.0;
  double reproj = 0.5;
  double theta = 1.0;
  double beta = 0.1;
  double vertices = 0.5;
};

struct TrainConfig {
  TrainMode mode = TrainMode::end_to_end;
  LossWeights weights;
  LossKind loss = LossKind::l1;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0 = only at the end
};

inline void validate(const TrainConfig& c) {
  const LossWeights& w = c.weights;
  for (double x : {w.joints3d, w.reproj, w.theta, w.beta, w.vertices})
    if (!(x >= 0.0)) throw ConfigError("loss weights must be >= 0");
  if (c.steps < 1) throw ConfigError("training steps must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(c.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
}

/// Weights with the terms a mode does not train forced to zero.
inline LossWeights effective_weights(const TrainConfig& c) {
  LossWeights w = c.weights;
  if (c.mode == TrainMode::lifter_only) w.theta = w.vertices = 0.0;
  if (c.mode == TrainMode::pse_only) w.joints3d = w.reproj = w.beta = 0.0;
  return w;
}

/// A synthetic training example, exactly realisable by the body model.
/// Joints are the h36m17 subset of the posed body joints, root-relative,
/// in meters; pose2d is their weak-perspective projection plus noise.
struct SynthSample {
  Tensor gt_theta;  // 24 x 3
  Tensor gt_beta;   // 10
  WeakPerspective gt_cam;
  Tensor gt_joints3d;  // 17 x 3
  Tensor gt_vertices;  // V x 3
  Tensor pose2d;       // 17 x 2
};

// Posed body joints -> root-relative h36m17 joints.
inline Tensor h36m_joints_from_body(const Tensor& body_joints) {
  const auto& map = smpl_to_h36m17();
  require(body_joints.rank() == 2 && body_joints.rows() == kBodyJoints && body_joints.cols() == 3,
          "body joints must be 24 x 3");
  Tensor out({map.size(), 3});
  for (std::size_t j = 0; j < map.size(); ++j)
    for (std::size_t c = 0; c < 3; ++c) out(j, c) = body_joints(map[j], c) - body_joints(map[0], c);
  return out;
}

namespace ad {

inline Var h36m_joints_from_body(Var body_joints) {
  Var picked = gather_rows(body_joints, smpl_to_h36m17());
  std::vector<std::size_t> root(smpl_to_h36m17().size(), 0);
  return picked - gather_rows(picked, root);
}

}  // namespace ad

inline std::vector<SynthSample> make_synth_dataset(std::size_t n, const BodyModel& model, std::uint64_t seed,
                                                   double noise_sigma = 0.0) {
  require(n >= 1, "synthetic dataset needs n >= 1");
  require(model.joint_count() == kBodyJoints && model.shape_count() == kShapeCoeffs,
          "synthetic data needs a 24-joint, 10-coefficient body model");
  Rng rng(seed);
  std::vector<SynthSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SynthSample s;
    s.gt_theta = Tensor({kBodyJoints, 3});
    s.gt_theta(0, 1) = rng.uniform(-std::numbers::pi, std::numbers::pi);
    for (std::size_t j = 1; j < kBodyJoints; ++j)
      for (std::size_t c = 0; c < 3; ++c) s.gt_theta(j, c) = rng.uniform(-0.4, 0.4);
    s.gt_beta = rng.uniform_tensor({kShapeCoeffs}, -2.0, 2.0);
    s.gt_cam.s = rng.uniform(0.8, 1.2);
    s.gt_cam.tx = rng.uniform(-0.1, 0.1);
    s.gt_cam.ty = rng.uniform(-0.1, 0.1);
    const PosedMesh posed = forward_kinematics_lbs(model, s.gt_theta, s.gt_beta);
    s.gt_vertices = posed.vertices;
    s.gt_joints3d = h36m_joints_from_body(posed.joints);
    s.pose2d = weak_perspective_project(s.gt_joints3d, s.gt_cam);
    if (noise_sigma > 0.0)
      for (double& v : s.pose2d.data()) v += noise_sigma * rng.normal();
    out.push_back(std::move(s));
  }
  return out;
}

namespace ad {

/// Predicted quantities entering the loss. Optional members may be absent
/// when the mode does not produce them.
struct Prediction {
  std::optional<Var> joints3d;
  std::optional<Var> camera;
  std::optional<Var> shape;
  std::optional<Var> theta;
  std::optional<Var> vertices;
};

inline Var distance(Var pred, const Tensor& target, LossKind kind) {
  require(pred.size() == target.size(), "loss term shape mismatch: " + to_string(pred.dims()) + " vs " +
                                            to_string(target.dims()));
  Var diff = pred - pred.tape().constant(target.reshaped(pred.dims()));
  return kind == LossKind::l1 ? mean_abs(diff) : mean_square(diff);
}

/// Weighted sum of per-term mean distances; zero-weight terms are skipped.
inline Var total_loss(const Prediction& p, const SynthSample& target, const LossWeights& w, LossKind kind, Tape& tape) {
  std::vector<std::pair<double, Var>> terms;
  auto need = [](const std::optional<Var>& v, const char* name) -> Var {
    require(v.has_value(), std::string("loss term '") + name + "' has weight but no prediction");
    return *v;
  };
  if (w.joints3d > 0.0) terms.emplace_back(w.joints3d, distance(need(p.joints3d, "joints3d"), target.gt_joints3d, kind));
  if (w.reproj > 0.0)
    terms.emplace_back(w.reproj, distance(weak_perspective_project(need(p.joints3d, "joints3d"), need(p.camera, "camera")),
                                          target.pose2d, kind));
  if (w.theta > 0.0) terms.emplace_back(w.theta, distance(need(p.theta, "theta"), target.gt_theta, kind));
  if (w.beta > 0.0) terms.emplace_back(w.beta, distance(need(p.shape, "shape"), target.gt_beta, kind));
  if (w.vertices > 0.0) terms.emplace_back(w.vertices, distance(need(p.vertices, "vertices"), target.gt_vertices, kind));
  Var loss = tape.constant(Tensor::scalar(0.0));
  for (const auto& [weight, term] : terms) loss = loss + scale(term, weight);
  return loss;
}

}  // namespace ad

/// Plain-tensor loss over concrete predictions (any of them may be empty
/// when its weight is zero).
struct PredictionValues {
  Tensor joints3d, camera, shape, theta, vertices;
};

inline double total_loss(const PredictionValues& p, const SynthSample& target, const LossWeights& w,
                         LossKind kind = LossKind::l1) {
  ad::Tape t(false);
  ad::Prediction pv;
  auto wrap = [&](const Tensor& x) -> std::optional<ad::Var> {
    if (x.empty()) return std::nullopt;
    return t.constant(x);
  };
  pv.joints3d = wrap(p.joints3d);
  pv.camera = wrap(p.camera);
  pv.shape = wrap(p.shape);
  pv.theta = wrap(p.theta);
  pv.vertices = wrap(p.vertices);
  return ad::total_loss(pv, target, w, kind, t).value()[0];
}

// ---------------------------------------------------------------------------
// Optimiser

using NamedParams = std::vector<std::pair<std::string, Tensor*>>;
using GradMap = std::map<std::string, Tensor>;

struct AdamState {
  std::map<std::string, Tensor> m, v;
  long step = 0;
};

/// One Adam update with bias correction. Parameters without a gradient
/// entry are left alone.
inline void adam_step(const NamedParams& params, const GradMap& grads, AdamState& state, const TrainConfig& cfg) {
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (const auto& [name, param] : params) {
    auto g = grads.find(name);
    if (g == grads.end()) continue;
    require(g->second.dims() == param->dims(), "gradient dims for '" + name + "' do not match the parameter");
    Tensor& m = state.m.try_emplace(name, param->dims()).first->second;
    Tensor& v = state.v.try_emplace(name, param->dims()).first->second;
    for (std::size_t i = 0; i < param->size(); ++i) {
      const double gi = g->second[i];
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      (*param)[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
    }
  }
}

template <class Params>
NamedParams named_params(Params& p) {
  NamedParams out;
  p.visit([&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

struct LossRecord {
  std::size_t step;
  double loss;
  double mpjpe_mm;
};

struct TrainResult {
  std::vector<LossRecord> curve;
};

inline std::size_t worker_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LIFTMESH_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
  }
  return n;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled by exactly one call; callers write results into slot i.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct SampleStep {
  double loss = 0.0;
  double mpjpe_mm = 0.0;
  GradMap grads;
};

/// Forward, loss and backward for one sample under the given mode.
inline SampleStep train_sample(const SynthSample& s, const LifterParams& lifter, const PseParams& pse,
                               const BodyModel& model, const TrainConfig& cfg) {
  ad::Tape tape;
  const bool train_lifter = cfg.mode != TrainMode::pse_only;
  const bool train_pse = cfg.mode != TrainMode::lifter_only;
  ad::Binder lb(tape, train_lifter), pb(tape, train_pse);
  const LossWeights w = effective_weights(cfg);

  ad::Prediction pred;
  std::optional<ad::Var> mesh_joints;
  const bool run_lifter = cfg.mode != TrainMode::pse_only || pse.config.source == PoseSource::features;
  std::optional<ad::LifterVars> lv;
  if (run_lifter) {
    lv = ad::lifter_forward(tape.constant(s.pose2d), lifter, lb);
    pred.joints3d = lv->joints3d;
    pred.camera = lv->camera;
    pred.shape = lv->shape;
  }
  if (train_pse) {
    ad::PseInput in{pse.config.source, pse.config.source == PoseSource::features
                                           ? lv->features
                                           : (cfg.mode == TrainMode::pse_only ? tape.constant(s.gt_joints3d) : lv->joints3d)};
    ad::Var fused = ad::pse_forward(in, model, pse, pb);
    ad::Var theta = ad::iterative_regress(fused, pse, pb).back();
    ad::Var beta = cfg.mode == TrainMode::pse_only && !run_lifter ? tape.constant(s.gt_beta) : *pred.shape;
    const ad::PosedVars posed = ad::forward_kinematics_lbs(model, theta, beta);
    pred.theta = theta;
    pred.vertices = posed.vertices;
    mesh_joints = posed.joints;
  }
  ad::Var loss = ad::total_loss(pred, s, w, cfg.loss, tape);
  tape.backward(loss);

  SampleStep out;
  out.loss = loss.value()[0];
  const Tensor gt_mm = [&] {
    Tensor t = s.gt_joints3d;
    for (double& v : t.data()) v *= kMillimetersPerMeter;
    return t;
  }();
  Tensor joints_pred =
      cfg.mode == TrainMode::pse_only ? ad::h36m_joints_from_body(*mesh_joints).value() : pred.joints3d->value();
  for (double& v : joints_pred.data()) v *= kMillimetersPerMeter;
  out.mpjpe_mm = mpjpe(Pose3D{joints_pred}, Pose3D{gt_mm});
  if (train_lifter)
    lifter.visit([&](const std::string& name, const Tensor& t) { out.grads.emplace(name, lb.grad(t)); });
  if (train_pse) pse.visit([&](const std::string& name, const Tensor& t) { out.grads.emplace(name, pb.grad(t)); });
  return out;
}

/// Called with (completed steps) after each step that hits checkpoint_every.
using CheckpointHook = std::function<void(std::size_t)>;

/// Mini-batch training. Batches walk a seeded permutation of the data;
/// per-sample gradients are reduced in sample order, so results do not
/// depend on the worker count. Each curve entry is measured on the batch
/// before that step's update.
inline TrainResult train_loop(const TrainConfig& cfg, const std::vector<SynthSample>& data, LifterParams& lifter,
                              PseParams& pse, const BodyModel& model, const CheckpointHook& hook = {}) {
  validate(cfg);
  require(!data.empty(), "training needs at least one sample");
  if (lifter.joints() != smpl_to_h36m17().size())
    throw ConfigError("training targets are h36m17 joints; lifter topology has " + std::to_string(lifter.joints()));
  const std::size_t batch = std::min(cfg.batch_size, data.size());
  const std::size_t threads = worker_threads();
  Rng rng(cfg.seed ^ 0x747261696eULL);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();

  NamedParams params;
  if (cfg.mode != TrainMode::pse_only) params = named_params(lifter);
  if (cfg.mode != TrainMode::lifter_only) {
    NamedParams p = named_params(pse);
    params.insert(params.end(), p.begin(), p.end());
  }
  AdamState state;
  TrainResult result;
  std::vector<SampleStep> steps(batch);
  std::vector<std::size_t> picked(batch);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
      }
      picked[b] = order[cursor++];
    }
    parallel_for(batch, threads, [&](std::size_t b) { steps[b] = train_sample(data[picked[b]], lifter, pse, model, cfg); });

    GradMap grads;
    double loss = 0.0, err = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      loss += steps[b].loss;
      err += steps[b].mpjpe_mm;
      for (auto& [name, g] : steps[b].grads) {
        auto [it, fresh] = grads.try_emplace(name, std::move(g));
        if (!fresh) it->second += g;
      }
    }
    const double inv = 1.0 / static_cast<double>(batch);
    loss *= inv;
    err *= inv;
    if (!std::isfinite(loss)) throw NumericalError("non-finite loss at step " + std::to_string(step), static_cast<long>(step));
    for (auto& [name, g] : grads)
      for (double& v : g.data()) v *= inv;
    result.curve.push_back({step, loss, err});
    adam_step(params, grads, state, cfg);
    if (hook && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) hook(step + 1);
  }
  return result;
}

/// Mean lifter MPJPE (mm) of the current parameters over a dataset.
inline double lifter_mpjpe_mm(const std::vector<SynthSample>& data, const LifterParams& lifter) {
  double total = 0.0;
  for (const SynthSample& s : data) {
    Tensor pred = lifter_forward(make_pose2d(s.pose2d), lifter).joints3d;
    Tensor gt = s.gt_joints3d;
    for (double& v : pred.data()) v *= kMillimetersPerMeter;
    for (double& v : gt.data()) v *= kMillimetersPerMeter;
    total += mpjpe(Pose3D{pred}, Pose3D{gt});
  }
  return total / static_cast<double>(data.size());
}

}  // namespace liftmesh
