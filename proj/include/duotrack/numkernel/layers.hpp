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
#include <string>
#include <vector>

#include "duotrack/numkernel/ops.hpp"
#include "duotrack/numkernel/params.hpp"

// Parameter naming helpers for the dense building blocks shared by the
// networks. A linear layer `name` owns `name.W` (in x out) and `name.b`.
namespace duotrack::nk {

void add_linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                Rng& rng);
Var linear(const Bound& p, const std::string& name, Var x);

void add_layernorm(ParamStore& store, const std::string& name, std::size_t dim);
Var layer_norm(const Bound& p, const std::string& name, Var x);

// dims = {in, h1, ..., out}; layers are `prefix.0`, `prefix.1`, ... with GELU
// between them and a linear output.
void add_mlp(ParamStore& store, const std::string& prefix, const std::vector<std::size_t>& dims,
             Rng& rng);
Var mlp(const Bound& p, const std::string& prefix, Var x, std::size_t layers);

// Index batches covering 0..n-1 in a shuffled order.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch, Rng& rng);

// Rows of a plain matrix gathered into a new tensor.
Tensor rows_of(const std::vector<std::vector<double>>& rows);

}  // namespace duotrack::nk
