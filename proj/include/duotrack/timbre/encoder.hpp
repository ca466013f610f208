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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "duotrack/corpus/generate.hpp"
#include "duotrack/metrics/encoders.hpp"
#include "duotrack/timbre/codebook.hpp"

namespace duotrack::timbre {

inline constexpr std::size_t kTimbreDim = 256;
inline constexpr std::size_t kProfileDim = 4;  // base_f0, f0_range, base_energy, base_rate

// Speaker-embedding network for the timbre track plus a linear readout that
// decodes the character's base profile from a unit timbre vector.
class TimbreEncoder {
 public:
  TimbreEncoder() = default;
  TimbreEncoder(metrics::ContourNet net, std::array<double, kProfileDim> mean,
                std::array<double, kProfileDim> stddev)
      : net_(std::move(net)), mean_(mean), std_(stddev) {}

  // Unit-norm per-utterance embeddings.
  std::vector<std::vector<double>> utterance_embeddings(std::span<const corpus::Contour> cs) const;
  // Mean of the utterance embeddings, renormalised. Throws DomainError when
  // `cs` is empty.
  std::vector<double> embed(std::span<const corpus::Contour> cs) const;
  corpus::BaseProfile decode_profile(std::span<const double> timbre) const;

  nk::Checkpoint to_checkpoint() const;
  static TimbreEncoder from_checkpoint(const nk::Checkpoint& ck);

  const metrics::ContourNet& net() const { return net_; }

 private:
  metrics::ContourNet net_;
  std::array<double, kProfileDim> mean_{};
  std::array<double, kProfileDim> std_{1.0, 1.0, 1.0, 1.0};
};

metrics::ContourNetConfig default_timbre_config();

// Trains on the train split of `corpus_for_training`; every character in it
// must be marked seen, otherwise LeakageError.
TimbreEncoder train_timbre_encoder(const corpus::Corpus& corpus_for_training, std::uint64_t seed,
                                   const metrics::ContourNetConfig& cfg = default_timbre_config());

std::array<double, kProfileDim> profile_vector(const corpus::BaseProfile& p);

}  // namespace duotrack::timbre
