/*
 * Copyright 2026 The ftsched Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ftsched/autodiff/tensor.hpp"

namespace ftsched::ad {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Ordered record of primitive applications. Nodes are appended in
// evaluation order, so reverse insertion order is a valid topological order
// for the backward sweep.
class Tape {
 public:
  // Receives the gradient flowing into the node and pushes contributions to
  // its parents through Tape::grad_of.
  using BackwardFn = std::function<void(Tape&, std::span<const double>)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Appends a derived node. The node requires a gradient iff any parent does;
  // `backward` is dropped otherwise.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  // Gradient accumulated at `v` by the last backward(); zeros if none reached
  // it.
  Tensor grad(Var v) const;

  // Mutable accumulation buffer for `v`, allocated on first use.
  std::span<double> grad_of(Var v);

  // Reverse sweep from a scalar output. Each recorded node is visited at most
  // once.
  void backward(Var output);

  void zero_grad();
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace ftsched::ad
