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

#include "duotrack/timbre/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "duotrack/core/errors.hpp"
#include "duotrack/core/rng.hpp"

namespace duotrack::timbre {

SQCodebook fit_codebook(const std::vector<std::vector<double>>& vectors, std::size_t levels,
                        std::uint64_t seed) {
  if (levels < 2) throw DomainError("codebook needs at least two levels");
  std::vector<double> pooled;
  for (const auto& v : vectors) pooled.insert(pooled.end(), v.begin(), v.end());
  std::sort(pooled.begin(), pooled.end());
  if (pooled.empty() || pooled.front() == pooled.back())
    throw DomainError("cannot fit a codebook on constant input");
  std::vector<double> distinct = pooled;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < levels)
    throw DomainError("codebook needs at least " + std::to_string(levels) +
                      " distinct values, got " + std::to_string(distinct.size()));

  SQCodebook cb;
  cb.seed = seed;
  cb.fit_count = pooled.size();
  if (distinct.size() == levels) {
    cb.levels = std::move(distinct);
    return cb;
  }
  const auto n = static_cast<double>(pooled.size());
  cb.levels.resize(levels);
  for (std::size_t i = 0; i < levels; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(levels);
    const double pos = q * n - 0.5;
    const double clamped = std::clamp(pos, 0.0, n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(clamped));
    const std::size_t hi = std::min(lo + 1, pooled.size() - 1);
    const double f = clamped - static_cast<double>(lo);
    cb.levels[i] = pooled[lo] + f * (pooled[hi] - pooled[lo]);
  }
  Rng rng(seed);
  const double tiny = 1e-9 * (pooled.back() - pooled.front());
  for (std::size_t i = 1; i < levels; ++i) {
    if (cb.levels[i] <= cb.levels[i - 1])
      cb.levels[i] = cb.levels[i - 1] + tiny * (1.0 + rng.uniform());
  }
  return cb;
}

std::size_t nearest_level(const SQCodebook& cb, double x) {
  const auto& l = cb.levels;
  const auto it = std::lower_bound(l.begin(), l.end(), x);
  if (it == l.begin()) return 0;
  if (it == l.end()) return l.size() - 1;
  const auto hi = static_cast<std::size_t>(it - l.begin());
  const std::size_t lo = hi - 1;
  return (x - l[lo]) <= (l[hi] - x) ? lo : hi;
}

TimbreCode quantize(std::span<const double> raw, const SQCodebook& cb) {
  if (cb.levels.empty()) throw ContractError("quantize with an unfitted codebook");
  TimbreCode code;
  code.raw.assign(raw.begin(), raw.end());
  code.indices.resize(raw.size());
  code.quantized.resize(raw.size());
  for (std::size_t d = 0; d < raw.size(); ++d) {
    code.indices[d] = nearest_level(cb, raw[d]);
    code.quantized[d] = cb.levels[code.indices[d]];
  }
  return code;
}

double quantization_mse(const std::vector<std::vector<double>>& vectors, const SQCodebook& cb) {
  double ss = 0.0;
  std::size_t n = 0;
  for (const auto& v : vectors) {
    for (double x : v) {
      const double q = cb.levels[nearest_level(cb, x)];
      ss += (x - q) * (x - q);
      ++n;
    }
  }
  return n ? ss / static_cast<double>(n) : 0.0;
}

nlohmann::json to_json(const SQCodebook& cb) {
  return {{"schema", 1},
          {"kind", "scalar"},
          {"size", cb.levels.size()},
          {"seed", cb.seed},
          {"fit_count", cb.fit_count},
          {"levels", cb.levels}};
}

SQCodebook codebook_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "scalar") throw DataError("not a scalar codebook");
  SQCodebook cb;
  cb.levels = j.at("levels").get<std::vector<double>>();
  cb.seed = j.value("seed", std::uint64_t{0});
  cb.fit_count = j.value("fit_count", std::size_t{0});
  if (cb.levels.size() != j.at("size").get<std::size_t>()) throw DataError("codebook size mismatch");
  for (std::size_t i = 1; i < cb.levels.size(); ++i) {
    if (!(cb.levels[i] > cb.levels[i - 1])) throw DataError("codebook levels not increasing");
  }
  return cb;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

std::size_t nearest_centroid(const VectorCodebook& cb, std::span<const double> v) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cb.centroids.size(); ++k) {
    const double d = sq_dist(cb.centroids[k], v);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  return best;
}

VectorCodebook fit_vector_codebook(const std::vector<std::vector<double>>& vectors, std::size_t k,
                                   std::uint64_t seed, int iterations) {
  if (k == 0 || vectors.size() < k) throw DomainError("vector codebook needs at least k vectors");
  Rng rng(seed);
  std::vector<std::size_t> order(vectors.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  VectorCodebook cb;
  for (std::size_t i = 0; i < k; ++i) cb.centroids.push_back(vectors[order[i]]);
  const std::size_t d = vectors[0].size();
  for (int it = 0; it < iterations; ++it) {
    std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (const auto& v : vectors) {
      const std::size_t c = nearest_centroid(cb, v);
      for (std::size_t j = 0; j < d; ++j) sums[c][j] += v[j];
      ++counts[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // keep an empty centroid where it is
      for (std::size_t j = 0; j < d; ++j) cb.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
  }
  return cb;
}

}  // namespace duotrack::timbre
