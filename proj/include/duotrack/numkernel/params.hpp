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
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "duotrack/core/rng.hpp"
#include "duotrack/numkernel/tape.hpp"

namespace duotrack::nk {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Ordered collection of named trainable tensors. Order is insertion order and
// is what the checkpoint and optimizer iterate over.
class ParamStore {
 public:
  void add(std::string name, Tensor value);
  bool has(std::string_view name) const;
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }

  // Overwrites values from `other`; names and shapes must agree.
  void assign(const std::vector<NamedTensor>& other);
  void zero();

 private:
  std::vector<NamedTensor> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// The parameters of a store placed on a tape, as trainable leaves or as
// constants for inference.
class Bound {
 public:
  Bound(Tape& tape, const ParamStore& store, bool trainable = true);
  Var operator[](std::string_view name) const;
  Var at(std::size_t i) const { return vars_[i]; }
  std::size_t size() const { return vars_.size(); }
  // Gradients in store order.
  std::vector<Tensor> gradients(const Gradients& g) const;

 private:
  const ParamStore* store_;
  std::vector<Var> vars_;
};

// Xavier-uniform weights for an (in x out) matrix.
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor normal_init(std::vector<std::size_t> shape, double stddev, Rng& rng);

// Binary checkpoint container; layout documented in docs/checkpoint_format.md.
struct Checkpoint {
  std::string meta;  // free-form UTF-8, JSON by convention
  std::vector<NamedTensor> tensors;

  const Tensor& get(std::string_view name) const;
  bool has(std::string_view name) const;
  void put(std::string name, Tensor value);
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Exact round trip of 64-bit words through doubles (two 32-bit halves each).
Tensor pack_words(std::span<const std::uint64_t> words);
std::vector<std::uint64_t> unpack_words(const Tensor& t);

}  // namespace duotrack::nk
