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

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "liftmesh/core/tensor.hpp"

namespace liftmesh::ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& dims() const { return value().dims(); }
  std::size_t size() const { return value().size(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only reverse-mode tape. Forward values are stored eagerly; each
/// recorded node carries a closure that scatters its output gradient into
/// its inputs' gradient buffers. Nodes whose inputs need no gradient drop
/// their closure, so inference on a tape costs only the forward values.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  // A tape built with grad_enabled=false never records closures.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var leaf(Tensor value, bool requires_grad = true) {
    nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, requires_grad && grad_enabled_});
    return Var(this, nodes_.size() - 1);
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }

  Var record(Tensor value, std::span<const Var> inputs, Backward backward) {
    bool needs = false;
    for (const Var& in : inputs) {
      require(in.tape_ == this, "tape op mixes variables from different tapes");
      needs = needs || nodes_[in.id_].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), Tensor{}, needs ? std::move(backward) : nullptr, needs});
    return Var(this, nodes_.size() - 1);
  }

  const Tensor& value(Var v) const { return nodes_[v.id_].value; }
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }

  // Gradient accumulator for v, zero-initialised on first touch.
  Tensor& grad_buffer(Var v) {
    Node& n = nodes_[v.id_];
    if (n.grad.empty()) n.grad = Tensor(n.value.dims());
    return n.grad;
  }

  void accumulate(Var v, const Tensor& g) {
    if (requires_grad(v)) grad_buffer(v) += g;
  }

  void backward(Var loss) {
    require(loss.tape_ == this, "loss is not on this tape");
    require(nodes_[loss.id_].value.size() == 1,
            "backward needs a scalar loss, got dims " + to_string(nodes_[loss.id_].value.dims()));
    for (Node& n : nodes_) n.grad = Tensor{};
    if (!nodes_[loss.id_].requires_grad) return;
    grad_buffer(loss)[0] = 1.0;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this, n.grad);
    }
  }

  // Gradient after backward(); zeros with the value's dims if unreached.
  Tensor grad(Var v) const {
    const Node& n = nodes_[v.id_];
    return n.grad.empty() ? Tensor(n.value.dims()) : n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    bool requires_grad;
  };

  std::deque<Node> nodes_;
  bool grad_enabled_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

/// Maps parameter tensors onto tape leaves, keyed by address. A parameter is
/// bound once per tape; gradients are read back by the same tensor.
class Binder {
 public:
  explicit Binder(Tape& tape, bool trainable = true) : tape_(&tape), trainable_(trainable) {}

  Var operator()(const Tensor& param) {
    auto it = bound_.find(&param);
    if (it != bound_.end()) return it->second;
    Var v = tape_->leaf(param, trainable_);
    bound_.emplace(&param, v);
    return v;
  }

  Tensor grad(const Tensor& param) const {
    auto it = bound_.find(&param);
    return it == bound_.end() ? Tensor(param.dims()) : tape_->grad(it->second);
  }

  Tape& tape() const { return *tape_; }

 private:
  Tape* tape_;
  bool trainable_;
  std::unordered_map<const Tensor*, Var> bound_;
};

}  // namespace liftmesh::ad
