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

#include "duotrack/metrics/scores.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "duotrack/core/errors.hpp"
#include "duotrack/core/interp.hpp"
#include "duotrack/core/log.hpp"

namespace duotrack::metrics {

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw DomainError("cosine of a zero vector");
  return ab / std::sqrt(aa * bb);
}

double ccs_cosine(const std::vector<Embedding>& gen, const std::vector<Embedding>& ref) {
  if (gen.size() != ref.size()) throw ContractError("ccs_cosine: lists differ in length");
  if (gen.empty()) throw ContractError("ccs_cosine: empty lists");
  double s = 0.0;
  for (std::size_t i = 0; i < gen.size(); ++i) s += cosine(gen[i], ref[i]);
  return s / static_cast<double>(gen.size());
}

EerResult compute_eer(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) throw ContractError("compute_eer: empty score list");
  std::vector<double> g(genuine.begin(), genuine.end()), im(impostor.begin(), impostor.end());
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  std::vector<double> thr;
  thr.reserve(g.size() + im.size());
  std::merge(g.begin(), g.end(), im.begin(), im.end(), std::back_inserter(thr));
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());

  const auto ng = static_cast<double>(g.size()), ni = static_cast<double>(im.size());
  std::vector<double> far(thr.size()), frr(thr.size());
  std::size_t gi = 0, ii = 0;
  for (std::size_t k = 0; k < thr.size(); ++k) {
    while (gi < g.size() && g[gi] < thr[k]) ++gi;
    while (ii < im.size() && im[ii] < thr[k]) ++ii;
    frr[k] = static_cast<double>(gi) / ng;
    far[k] = static_cast<double>(im.size() - ii) / ni;
  }

  // Threshold k stands for the half-open interval (thr[k-1], thr[k]] on which
  // both rates are constant.
  std::size_t first = thr.size(), last = thr.size();
  for (std::size_t k = 0; k < thr.size(); ++k) {
    if (far[k] == frr[k]) {
      if (first == thr.size()) first = k;
      last = k;
    }
  }
  if (first != thr.size()) {
    const double lo = first == 0 ? thr[0] : thr[first - 1];
    const double mid = (lo + thr[last]) / 2;
    std::size_t k = first;
    while (k < last && thr[k] < mid) ++k;
    return {far[k], mid};
  }
  for (std::size_t k = 0; k + 1 < thr.size(); ++k) {
    const double d0 = far[k] - frr[k], d1 = far[k + 1] - frr[k + 1];
    if (d0 > 0.0 && d1 < 0.0) {
      const double w = d0 / (d0 - d1);
      return {far[k] * (1 - w) + far[k + 1] * w, thr[k] * (1 - w) + thr[k + 1] * w};
    }
  }
  // Crossing lies above the largest score, where FAR = 0 and FRR = 1.
  const std::size_t k = thr.size() - 1;
  const double d0 = far[k] - frr[k];
  const double w = d0 / (d0 + 1.0);
  return {far[k] * (1 - w), thr[k]};
}

double cluster_radius_ratio(const std::map<std::string, std::vector<Embedding>>& by_character) {
  if (by_character.size() < 2) throw ContractError("cluster radius needs at least two characters");
  std::vector<Embedding> centroids;
  double intra = 0.0;
  for (const auto& [id, embs] : by_character) {
    if (embs.size() < 2) throw ContractError("cluster radius needs two embeddings for " + id);
    const std::size_t d = embs[0].size();
    Embedding c(d, 0.0);
    for (const auto& e : embs)
      for (std::size_t i = 0; i < d; ++i) c[i] += e[i];
    for (double& v : c) v /= static_cast<double>(embs.size());
    double ss = 0.0;
    for (const auto& e : embs)
      for (std::size_t i = 0; i < d; ++i) ss += (e[i] - c[i]) * (e[i] - c[i]);
    intra += std::sqrt(ss / static_cast<double>(embs.size()));
    centroids.push_back(std::move(c));
  }
  intra /= static_cast<double>(centroids.size());
  double inter = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < centroids.size(); ++a) {
    for (std::size_t b = a + 1; b < centroids.size(); ++b) {
      double ss = 0.0;
      for (std::size_t i = 0; i < centroids[a].size(); ++i)
        ss += (centroids[a][i] - centroids[b][i]) * (centroids[a][i] - centroids[b][i]);
      inter += std::sqrt(ss);
      ++pairs;
    }
  }
  inter /= static_cast<double>(pairs);
  if (inter <= 1e-300) {
    log_warning("cluster radius ratio: all character centroids coincide; returning +inf");
    return std::numeric_limits<double>::infinity();
  }
  return intra / inter;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double eea(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size()) throw ContractError("eea: lists differ in length");
  if (labels.empty()) throw ContractError("eea: empty lists");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double f0_rmse(std::span<const double> gen, std::span<const double> ref) {
  if (gen.empty() || ref.empty()) throw ContractError("f0_rmse: empty contour");
  std::vector<double> a(gen.begin(), gen.end()), b(ref.begin(), ref.end());
  if (a.size() < b.size()) a = resample_linear(a, b.size());
  if (b.size() < a.size()) b = resample_linear(b, a.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(ss / static_cast<double>(a.size()));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("quantile of an empty list");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace duotrack::metrics
