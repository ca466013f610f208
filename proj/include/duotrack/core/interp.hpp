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

namespace duotrack {

// Linear resampling with both endpoints aligned. A single-sample source is
// held constant.
std::vector<double> resample_linear(std::span<const double> src, std::size_t n);

// Mean over `bins` equal-width segments (last segment takes the remainder).
// Requires src.size() >= 1; segments shorter than one sample reuse the
// nearest sample.
std::vector<double> segment_means(std::span<const double> src, std::size_t bins);

}  // namespace duotrack
