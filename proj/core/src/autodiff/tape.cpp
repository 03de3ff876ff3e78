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

#include "ftsched/autodiff/tape.hpp"

#include <algorithm>

#include "ftsched/error.hpp"

namespace ftsched::ad {

const Tensor& Var::value() const {
  if (!tape_) throw StateError("use of an unbound Var");
  return tape_->value(*this);
}

bool Var::requires_grad() const {
  return tape_ != nullptr && tape_->requires_grad(*this);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> parents,
                 BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    check(p);
    needs = needs || nodes_[p.id()].requires_grad;
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs;
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw StateError("Var does not belong to this tape");
  }
}

const Tensor& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id()].value;
}

bool Tape::requires_grad(Var v) const {
  check(v);
  return nodes_[v.id()].requires_grad;
}

Tensor Tape::grad(Var v) const {
  check(v);
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(n.value.shape());
  return Tensor(n.value.shape(), n.grad);
}

std::span<double> Tape::grad_of(Var v) {
  check(v);
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Var output) {
  check(output);
  if (nodes_[output.id()].value.size() != 1) {
    throw DimensionError("backward() needs a scalar output, got shape " +
                         shape_str(nodes_[output.id()].value.shape()));
  }
  zero_grad();
  if (!nodes_[output.id()].requires_grad) return;
  grad_of(output)[0] = 1.0;
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    // Callbacks only touch parent buffers, which live in other nodes.
    n.backward(*this, std::span<const double>(n.grad));
  }
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad.clear();
}

}  // namespace ftsched::ad
