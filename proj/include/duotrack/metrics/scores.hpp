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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "duotrack/corpus/types.hpp"

namespace duotrack::metrics {

using Embedding = std::vector<double>;

// Throws DomainError when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

// Mean pairwise cosine of aligned embedding lists.
double ccs_cosine(const std::vector<Embedding>& gen, const std::vector<Embedding>& ref);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Accept when score >= threshold. FAR(t) = share of impostors >= t, FRR(t) =
// share of genuine < t, swept over every observed score. When the rates meet
// on an interval the threshold is its midpoint; otherwise both rates are
// interpolated linearly between the bracketing thresholds.
EerResult compute_eer(std::span<const double> genuine, std::span<const double> impostor);

// Within-character RMS spread over mean between-centroid distance. Returns
// +infinity (with a warning) when all centroids coincide.
double cluster_radius_ratio(const std::map<std::string, std::vector<Embedding>>& by_character);

// Index of the largest value, ties toward the lower index.
std::size_t argmax(std::span<const double> values);

double eea(std::span<const std::size_t> predicted, std::span<const std::size_t> labels);

// RMS f0 difference after resampling the shorter contour to the longer one.
double f0_rmse(std::span<const double> gen, std::span<const double> ref);
inline double f0_rmse(const corpus::Contour& gen, const corpus::Contour& ref) {
  return f0_rmse(gen.f0, ref.f0);
}

// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace duotrack::metrics
