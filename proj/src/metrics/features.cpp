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

#include "duotrack/metrics/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "duotrack/core/errors.hpp"
#include "duotrack/core/interp.hpp"

namespace duotrack::metrics {

std::vector<double> contour_features(const corpus::Contour& c) {
  if (c.f0.empty() || c.energy.size() != c.f0.size() || c.durations.empty())
    throw DomainError("malformed contour");
  const auto n = static_cast<double>(c.f0.size());
  std::vector<double> out;
  out.reserve(kFeatureDim);

  const double f0_mean = std::accumulate(c.f0.begin(), c.f0.end(), 0.0) / n;
  double f0_var = 0.0;
  for (double v : c.f0) f0_var += (v - f0_mean) * (v - f0_mean);
  const auto [f0_min, f0_max] = std::minmax_element(c.f0.begin(), c.f0.end());
  const double e_mean = std::accumulate(c.energy.begin(), c.energy.end(), 0.0) / n;
  double e_var = 0.0;
  for (double v : c.energy) e_var += (v - e_mean) * (v - e_mean);
  const double pauses = std::accumulate(c.pauses.begin(), c.pauses.end(), 0.0);

  out.push_back(f0_mean);
  out.push_back(std::sqrt(f0_var / n));
  out.push_back(*f0_max - *f0_min);
  out.push_back(e_mean);
  out.push_back(std::sqrt(e_var / n));
  out.push_back(static_cast<double>(c.durations.size()) * kFrameRate / n);
  out.push_back(pauses / (n + pauses));

  std::vector<double> hist(kHistBins, 0.0);
  const double lo = -0.4, width = 0.1;
  for (double v : c.f0) {
    const double r = std::log(v / f0_mean);
    auto b = static_cast<long>(std::floor((r - lo) / width));
    b = std::clamp<long>(b, 0, static_cast<long>(kHistBins) - 1);
    hist[static_cast<std::size_t>(b)] += 1.0 / n;
  }
  out.insert(out.end(), hist.begin(), hist.end());

  for (double v : segment_means(c.f0, kSegments)) out.push_back(v / f0_mean - 1.0);
  for (double v : segment_means(c.energy, kSegments)) out.push_back(v - e_mean);
  return out;
}

FeatureScaler FeatureScaler::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ContractError("scaler fit on an empty set");
  const std::size_t d = rows[0].size();
  FeatureScaler s;
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i) s.mean[i] += r[i];
  for (double& m : s.mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i) s.stddev[i] += (r[i] - s.mean[i]) * (r[i] - s.mean[i]);
  for (double& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(rows.size()));
    if (v < 1e-8) v = 1.0;
  }
  return s;
}

std::vector<double> FeatureScaler::apply(const std::vector<double>& row) const {
  if (row.size() != mean.size()) throw ShapeError("scaler: feature width mismatch");
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = (row[i] - mean[i]) / stddev[i];
  return out;
}

}  // namespace duotrack::metrics
