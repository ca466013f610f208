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
#include <span>
#include <vector>

#include "duotrack/numkernel/tape.hpp"

// Differentiable primitives. All inputs must live on the same tape; the result
// is recorded there. Shapes follow the rank <= 2 convention of Tensor.
namespace duotrack::nk {

Var matmul(Var a, Var b);
Var transpose(Var a);

// Same shape, or `b` is a 1xn row broadcast over the rows of `a`, or a scalar.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double c);
// Elementwise product with / sum with a constant tensor of the same shape.
Var mul_const(Var a, const Tensor& c);
Var add_const(Var a, const Tensor& c);

Var tanh(Var a);
Var sigmoid(Var a);
Var gelu(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var layernorm_rows(Var x, Var gain, Var bias, double eps = 1e-5);
Var normalize_rows(Var a);

Var gather_rows(Var table, std::span<const std::size_t> ids);

Var sum(Var a);
Var mean(Var a);
Var mean_rows(Var a);  // column means, 1xn
Var squared_error(Var a, Var b);  // sum of squared differences, scalar
Var l2_norm(Var a);               // Euclidean norm of all entries, scalar

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var pick(Var a, std::size_t row, std::size_t col);  // scalar element

// Cross-entropy of one row of logits against a class index.
Var cross_entropy_row(Var logits, std::size_t row, std::size_t label);
// Mean cross-entropy over all rows, one label per row.
Var cross_entropy_mean(Var logits, std::span<const std::size_t> labels);

}  // namespace duotrack::nk
