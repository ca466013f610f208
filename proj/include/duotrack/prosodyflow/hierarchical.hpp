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
#include <vector>

#include "duotrack/adapter/adapter.hpp"
#include "duotrack/corpus/generate.hpp"
#include "duotrack/prosodyflow/flow.hpp"

namespace duotrack::flow {

// Fine curves are stored in these units: multiples of the voice's f0 range for
// pitch and energy / kFineEnergyScale for energy. Expressing pitch against the
// voice keeps the curve free of speaker identity, which the timbre track owns.
inline constexpr double kFineEnergyScale = 0.1;
inline constexpr double kFineLimit = 5.0;

// Pitch then energy modulation of a contour around its means, averaged onto
// `grid` segments and scaled to fine-curve units (2*grid values). DomainError
// unless f0_range > 0.
std::vector<double> fine_target(const corpus::Contour& c, std::size_t grid, double f0_range);

// Condition of the coarse stage: the unit-normalised persona embedding
// followed by a one-hot emotion hint.
std::vector<double> persona_condition(std::span<const double> persona_embedding,
                                      std::size_t emotion_hint);

struct FlowPrediction {
  std::vector<double> coarse;  // V, A, D, f0_rel, e_rel
  std::vector<double> fine;    // pitch then energy, fine_dim each
};

struct StageLog {
  std::vector<double> coarse_loss;  // per epoch
  std::vector<double> fine_loss;
};

class ProsodyFlow {
 public:
  ProsodyFlow() = default;
  ProsodyFlow(const FlowConfig& cfg, std::size_t persona_dim, std::uint64_t seed);

  const FlowConfig& config() const { return cfg_; }
  std::size_t persona_dim() const { return persona_dim_; }
  std::size_t coarse_cond_dim() const;
  std::size_t fine_cond_dim() const;

  VelocityNet& coarse_net() { return coarse_; }
  VelocityNet& fine_net() { return fine_; }
  const VelocityNet& coarse_net() const { return coarse_; }
  const VelocityNet& fine_net() const { return fine_; }
  bool has_coarse() const { return has_coarse_; }
  bool has_fine() const { return has_fine_; }
  void mark_trained(bool coarse, bool fine);

  // Both stages must be present, otherwise ConfigError.
  std::vector<double> sample_coarse(std::span<const double> condition, std::uint64_t seed) const;
  std::vector<double> sample_fine(std::span<const double> condition,
                                  std::span<const double> coarse, std::uint64_t seed) const;
  FlowPrediction predict(const adapter::AdapterOutput& out, std::span<const int> tokens,
                         std::uint64_t seed) const;

  nk::Checkpoint to_checkpoint() const;
  static ProsodyFlow from_checkpoint(const nk::Checkpoint& ck);

  // Applies the scale override used by sampling-only experiments.
  void set_sampling(int steps, double cfg_scale);

 private:
  void require_stage(bool present, const char* name) const;

  FlowConfig cfg_;
  std::size_t persona_dim_ = 0;
  VelocityNet coarse_;
  VelocityNet fine_;
  bool has_coarse_ = false;
  bool has_fine_ = false;
};

struct TrainedFlow {
  ProsodyFlow flow;
  StageLog log;
};

// Trains both stages on the train split with the adapter frozen. The coarse
// stage regresses `targets` (teacher targets by default); the fine stage is
// conditioned on the true coarse vector. Unseen characters in the training
// split raise LeakageError.
TrainedFlow train_flow(const corpus::Corpus& corpus, const adapter::Adapter& model,
                       const FlowConfig& cfg, std::uint64_t seed,
                       const std::vector<corpus::ProsodyTarget>* targets = nullptr);

// Mean absolute coarse error over `indices` against `targets`, for flow samples
// and for the sampler's clamped starting noise drawn from the same seeds.
struct CoarseError {
  double model = 0.0;
  double noise = 0.0;
};

CoarseError coarse_error(const ProsodyFlow& flow, const adapter::Adapter& model,
                         const corpus::Corpus& corpus, const std::vector<std::size_t>& indices,
                         const std::vector<corpus::ProsodyTarget>& targets, std::uint64_t seed);

}  // namespace duotrack::flow
