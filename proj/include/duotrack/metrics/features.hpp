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
#include <vector>

#include "duotrack/corpus/types.hpp"

namespace duotrack::metrics {

// Fixed-length contour summary: f0 mean/std/range, energy mean/std, speaking
// rate, pause ratio, an 8-bin histogram of log(f0 / mean f0), then 8-segment
// f0 and energy profiles.
inline constexpr std::size_t kHistBins = 8;
inline constexpr std::size_t kSegments = 8;
inline constexpr std::size_t kFeatureDim = 7 + kHistBins + 2 * kSegments;
inline constexpr double kFrameRate = 50.0;

std::vector<double> contour_features(const corpus::Contour& c);

// Per-column standardisation fitted on a training set.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  static FeatureScaler fit(const std::vector<std::vector<double>>& rows);
  std::vector<double> apply(const std::vector<double>& row) const;
};

}  // namespace duotrack::metrics
