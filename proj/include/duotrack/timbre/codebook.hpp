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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace duotrack::timbre {

inline constexpr std::size_t kCodebookLevels = 512;

// Sorted scalar levels shared by every dimension.
struct SQCodebook {
  std::vector<double> levels;
  std::uint64_t seed = 0;
  std::size_t fit_count = 0;  // scalar values the levels were fitted on
};

struct TimbreCode {
  std::vector<double> raw;
  std::vector<double> quantized;
  std::vector<std::size_t> indices;
};

// Empirical quantiles at (i + 0.5) / levels of all pooled coordinates. When the
// data holds exactly `levels` distinct values they become the levels. Repeated
// quantiles are pushed apart by a small seeded jitter. Throws DomainError for
// constant input or fewer than `levels` distinct values.
SQCodebook fit_codebook(const std::vector<std::vector<double>>& vectors, std::size_t levels,
                        std::uint64_t seed);

// Nearest level by binary search; ties go to the lower index.
std::size_t nearest_level(const SQCodebook& cb, double x);
TimbreCode quantize(std::span<const double> raw, const SQCodebook& cb);

// Mean squared quantisation error over all coordinates.
double quantization_mse(const std::vector<std::vector<double>>& vectors, const SQCodebook& cb);

nlohmann::json to_json(const SQCodebook& cb);
SQCodebook codebook_from_json(const nlohmann::json& j);

// Alternate mode: `k` centroids in the full embedding space, fitted by Lloyd
// iterations from a seeded choice of distinct training vectors.
struct VectorCodebook {
  std::vector<std::vector<double>> centroids;
};

VectorCodebook fit_vector_codebook(const std::vector<std::vector<double>>& vectors, std::size_t k,
                                   std::uint64_t seed, int iterations = 20);
// Index of the nearest centroid (squared Euclidean), ties to the lower index.
std::size_t nearest_centroid(const VectorCodebook& cb, std::span<const double> v);

}  // namespace duotrack::timbre
