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

// Straight-from-definition re-implementations used to cross-check the library.
// They favour obviousness over speed and share no code with src/.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

namespace duotrack::testing {

struct EerOracle {
  double eer;
  double threshold;
};

// O(n^2) sweep: every distinct observed score is a candidate threshold and
// both error rates are recounted from scratch at each one.
inline EerOracle brute_force_eer(const std::vector<double>& genuine,
                                 const std::vector<double>& impostor) {
  std::set<double> uniq(genuine.begin(), genuine.end());
  uniq.insert(impostor.begin(), impostor.end());
  std::vector<double> t(uniq.begin(), uniq.end());
  auto far_at = [&](double th) {
    double c = 0;
    for (double s : impostor) c += s >= th ? 1 : 0;
    return c / static_cast<double>(impostor.size());
  };
  auto frr_at = [&](double th) {
    double c = 0;
    for (double s : genuine) c += s < th ? 1 : 0;
    return c / static_cast<double>(genuine.size());
  };
  std::vector<std::size_t> equal;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (far_at(t[k]) == frr_at(t[k])) equal.push_back(k);
  if (!equal.empty()) {
    const double lo = equal.front() == 0 ? t[0] : t[equal.front() - 1];
    const double mid = (lo + t[equal.back()]) / 2;
    // The rates are constant on (t[k-1], t[k]]; find the piece holding mid.
    std::size_t k = equal.front();
    while (k < equal.back() && t[k] < mid) ++k;
    return {far_at(t[k]), mid};
  }
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double a0 = far_at(t[k]) - frr_at(t[k]);
    const double a1 = far_at(t[k + 1]) - frr_at(t[k + 1]);
    if (a0 > 0 && a1 < 0) {
      const double w = a0 / (a0 - a1);
      return {far_at(t[k]) * (1 - w) + far_at(t[k + 1]) * w, t[k] * (1 - w) + t[k + 1] * w};
    }
  }
  const double a0 = far_at(t.back()) - frr_at(t.back());
  const double w = a0 / (a0 + 1.0);
  return {far_at(t.back()) * (1 - w), t.back()};
}

struct RankOracle {
  double ap;
  bool hit1, hit5, hit10;
  double rr;
};

// Relevance flags in rank order, `total_relevant` relevant items overall.
inline RankOracle naive_rank_metrics(const std::vector<bool>& ranked, std::size_t total_relevant) {
  RankOracle o{0, false, false, false, 0};
  std::size_t seen = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!ranked[i]) continue;
    ++seen;
    o.ap += static_cast<double>(seen) / static_cast<double>(i + 1);
    if (o.rr == 0) o.rr = 1.0 / static_cast<double>(i + 1);
    if (i < 1) o.hit1 = true;
    if (i < 5) o.hit5 = true;
    if (i < 10) o.hit10 = true;
  }
  o.ap /= static_cast<double>(total_relevant);
  return o;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double plain_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

// Hybrid distillation loss for one example: prosody L2 distance plus the
// weighted rationale L2 distance.
inline double plain_distill_loss(const std::vector<double>& p, const std::vector<double>& pt,
                                 const std::vector<double>& h, const std::vector<double>& ht,
                                 double lam) {
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) a += (p[i] - pt[i]) * (p[i] - pt[i]);
  for (std::size_t i = 0; i < h.size(); ++i) b += (h[i] - ht[i]) * (h[i] - ht[i]);
  return std::sqrt(a) + lam * std::sqrt(b);
}

inline double plain_contrastive_loss(const std::vector<double>& zi, const std::vector<double>& zp,
                                     const std::vector<std::vector<double>>& negs, double tau) {
  const double pos = std::exp(plain_cosine(zi, zp) / tau);
  double denom = pos;
  for (const auto& n : negs) denom += std::exp(plain_cosine(zi, n) / tau);
  return -std::log(pos / denom);
}

}  // namespace duotrack::testing
