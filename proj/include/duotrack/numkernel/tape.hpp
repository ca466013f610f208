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

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <unordered_map>

#include "duotrack/numkernel/tensor.hpp"

namespace duotrack::nk {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Leaf gradients produced by one backward pass.
class Gradients {
 public:
  // Gradient for a leaf; zeros if the leaf did not influence the loss.
  const Tensor& of(Var leaf) const;
  bool contains(Var leaf) const { return grads_.count(leaf.id()) != 0; }

 private:
  friend class Tape;
  std::unordered_map<std::size_t, Tensor> grads_;
};

// Records primitive ops in execution order. Because ops are appended after
// their inputs, walking the record backwards is a reverse topological order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);

  // Appends an op result. `fn` runs only when some parent requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn fn);

  Gradients backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  // Zero-initialised accumulator for node `id`.
  Tensor& grad_buffer(std::size_t id);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    BackwardFn backward;
    bool requires_grad = false;
    bool leaf = false;
  };
  Var push(Node node);

  std::deque<Node> nodes_;
};

}  // namespace duotrack::nk
