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

#include "duotrack/core/interp.hpp"

#include <algorithm>
#include <cmath>

#include "duotrack/core/errors.hpp"

namespace duotrack {

std::vector<double> resample_linear(std::span<const double> src, std::size_t n) {
  if (src.empty()) throw ContractError("resample of an empty sequence");
  std::vector<double> out(n);
  if (src.size() == 1 || n == 1) {
    std::fill(out.begin(), out.end(), src[0]);
    return out;
  }
  const double step = static_cast<double>(src.size() - 1) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) * step;
    auto lo = static_cast<std::size_t>(std::floor(x));
    if (lo >= src.size() - 1) {
      out[i] = src.back();
      continue;
    }
    const double f = x - static_cast<double>(lo);
    out[i] = src[lo] + f * (src[lo + 1] - src[lo]);
  }
  return out;
}

std::vector<double> segment_means(std::span<const double> src, std::size_t bins) {
  if (src.empty()) throw ContractError("segment means of an empty sequence");
  std::vector<double> out(bins, 0.0);
  const std::size_t n = src.size();
  for (std::size_t b = 0; b < bins; ++b) {
    std::size_t lo = b * n / bins;
    std::size_t hi = (b + 1) * n / bins;
    if (hi <= lo) {
      lo = std::min(lo, n - 1);
      hi = lo + 1;
    }
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += src[i];
    out[b] = s / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace duotrack
