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
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "liftmesh/core/rng.hpp"
#include "liftmesh/core/tape.hpp"

namespace liftmesh {

// A differentiable scalar function of one tensor, written against the tape.
using ScalarFunction = std::function<ad::Var(ad::Tape&, ad::Var)>;

inline double evaluate(const ScalarFunction& f, const Tensor& x) {
  ad::Tape tape(false);
  const ad::Var y = f(tape, tape.constant(x));
  require(y.size() == 1, "function under check must return a scalar");
  return y.value()[0];
}

inline Tensor analytic_gradient(const ScalarFunction& f, const Tensor& x) {
  ad::Tape tape;
  const ad::Var xv = tape.leaf(x);
  const ad::Var y = f(tape, xv);
  tape.backward(y);
  return tape.grad(xv);
}

/// Max over components of |analytic - central difference| / max(1, |analytic|).
/// step <= 0 selects 1e-4 * max(1, |x|_inf). With max_components > 0 only a
/// seeded random subset of that many components is differenced.
inline double finite_diff_check(const ScalarFunction& f, const Tensor& x, double step = 0.0,
                                std::size_t max_components = 0, std::uint64_t seed = 0) {
  const double h = step > 0.0 ? step : 1e-4 * std::max(1.0, x.max_abs());
  const Tensor grad = analytic_gradient(f, x);

  std::vector<std::size_t> comps(x.size());
  std::iota(comps.begin(), comps.end(), std::size_t{0});
  if (max_components > 0 && max_components < comps.size()) {
    Rng rng(seed);
    for (std::size_t i = 0; i < max_components; ++i) std::swap(comps[i], comps[i + rng.below(comps.size() - i)]);
    comps.resize(max_components);
  }

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i : comps) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = evaluate(f, probe);
    probe[i] = orig - h;
    const double fm = evaluate(f, probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(grad[i] - numeric) / std::max(1.0, std::abs(grad[i])));
  }
  return worst;
}


// A scalar function of parameters bound through a Binder.
using ParamFunction = std::function<ad::Var(ad::Tape&, ad::Binder&)>;

/// finite_diff_check over parameter tensors, which are perturbed in place
/// and restored. Components are drawn jointly across all tensors.
inline double finite_diff_check_params(const ParamFunction& f, const std::vector<Tensor*>& params, double step = 0.0,
                                       std::size_t max_components = 0, std::uint64_t seed = 0) {
  double largest = 0.0;
  for (const Tensor* p : params) largest = std::max(largest, p->max_abs());
  const double h = step > 0.0 ? step : 1e-4 * std::max(1.0, largest);

  std::vector<Tensor> grads;
  {
    ad::Tape tape;
    ad::Binder bind(tape);
    const ad::Var y = f(tape, bind);
    require(y.size() == 1, "function under check must return a scalar");
    tape.backward(y);
    for (const Tensor* p : params) grads.push_back(bind.grad(*p));
  }
  auto value = [&] {
    ad::Tape tape(false);
    ad::Binder bind(tape, false);
    return f(tape, bind).value()[0];
  };

  std::vector<std::pair<std::size_t, std::size_t>> comps;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t]->size(); ++i) comps.emplace_back(t, i);
  if (max_components > 0 && max_components < comps.size()) {
    Rng rng(seed);
    for (std::size_t i = 0; i < max_components; ++i) std::swap(comps[i], comps[i + rng.below(comps.size() - i)]);
    comps.resize(max_components);
  }

  double worst = 0.0;
  for (const auto& [t, i] : comps) {
    double& x = (*params[t])[i];
    const double orig = x;
    x = orig + h;
    const double fp = value();
    x = orig - h;
    const double fm = value();
    x = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = grads[t][i];
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
  }
  return worst;
}

}  // namespace liftmesh
