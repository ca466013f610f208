// Copyright 2026 The duotrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "duotrack/numkernel/tape.hpp"

#include "duotrack/core/errors.hpp"

namespace duotrack::nk {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() on an unbound Var");
  return tape_->value(id_);
}

const Tensor& Gradients::of(Var leaf) const {
  auto it = grads_.find(leaf.id());
  if (it == grads_.end()) throw ContractError("no gradient recorded for this variable");
  return it->second;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.leaf = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  bool req = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw ContractError("op mixes variables from different tapes");
    req = req || nodes_[p.id()].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = req;
  if (req) n.backward = std::move(fn);
  return push(std::move(n));
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  bool req = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw ContractError("op mixes variables from different tapes");
    req = req || nodes_[p.id()].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = req;
  if (req) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad) n.grad = Tensor::zeros(n.value.shape());
  return *n.grad;
}

Gradients Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("loss was not recorded on this tape");
  if (!value(loss.id()).is_scalar()) {
    throw ContractError("backward() needs a scalar loss, got " +
                        value(loss.id()).shape_string());
  }
  for (auto& n : nodes_) n.grad.reset();
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.grad || !n.backward) continue;
    // Parents precede the node, so the callback never touches this buffer.
    const Tensor& g = *n.grad;
    n.backward(*this, g);
  }
  Gradients out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.leaf) continue;
    out.grads_.emplace(i, n.grad ? std::move(*n.grad) : Tensor::zeros(n.value.shape()));
    n.grad.reset();
  }
  return out;
}

}  // namespace duotrack::nk
