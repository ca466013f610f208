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

#include "duotrack/numkernel/layers.hpp"

#include <numeric>

#include "duotrack/core/errors.hpp"

namespace duotrack::nk {

void add_linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                Rng& rng) {
  store.add(name + ".W", xavier_uniform(in, out, rng));
  store.add(name + ".b", Tensor::zeros({1, out}));
}

Var linear(const Bound& p, const std::string& name, Var x) {
  return add(matmul(x, p[name + ".W"]), p[name + ".b"]);
}

void add_layernorm(ParamStore& store, const std::string& name, std::size_t dim) {
  store.add(name + ".g", Tensor::filled({1, dim}, 1.0));
  store.add(name + ".b", Tensor::zeros({1, dim}));
}

Var layer_norm(const Bound& p, const std::string& name, Var x) {
  return layernorm_rows(x, p[name + ".g"], p[name + ".b"]);
}

void add_mlp(ParamStore& store, const std::string& prefix, const std::vector<std::size_t>& dims,
             Rng& rng) {
  if (dims.size() < 2) throw ContractError("mlp needs at least input and output sizes");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    add_linear(store, prefix + "." + std::to_string(i), dims[i], dims[i + 1], rng);
}

Var mlp(const Bound& p, const std::string& prefix, Var x, std::size_t layers) {
  for (std::size_t i = 0; i < layers; ++i) {
    x = linear(p, prefix + "." + std::to_string(i), x);
    if (i + 1 < layers) x = gelu(x);
  }
  return x;
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch, Rng& rng) {
  if (batch == 0) throw ContractError("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch) {
    out.emplace_back(order.begin() + static_cast<long>(i),
                     order.begin() + static_cast<long>(std::min(n, i + batch)));
  }
  return out;
}

Tensor rows_of(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ContractError("rows_of needs at least one row");
  const std::size_t c = rows[0].size();
  Tensor t = Tensor::zeros({rows.size(), c});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != c) throw ShapeError("rows_of: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), t.row(r).begin());
  }
  return t;
}

}  // namespace duotrack::nk
