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
#include <vector>

#include "duotrack/corpus/types.hpp"

namespace duotrack::corpus {

struct RenderConfig {
  double fps = 50.0;
  double f0_jitter_hz = 2.0;
  double energy_jitter = 0.01;
  double duration_jitter = 0.1;  // log-normal sigma on frames per token
  double pause_jitter = 0.3;     // relative sigma on pause frames
};

// Smooth per-emotion contour shape sampled at frame centres; zero mean and
// unit RMS over the sampled frames (all zeros for a single frame).
std::vector<double> emotion_template(Emotion e, std::size_t frames);

// Contour amplitude multiplier for a given arousal.
inline double expressivity(double arousal) { return 0.3 + 0.7 * arousal; }
// Tempo factor on frames per token; higher arousal speaks faster.
inline double duration_factor(double arousal) { return 1.0 / (0.6 + 0.8 * arousal); }
// Pause multiplier; calm, low-valence speech pauses more.
inline double pause_factor(double arousal, double valence) {
  return 1.0 - arousal + 0.5 * (1.0 - valence);
}
// Mean pause frames per token for a speech pattern.
double pause_mean_frames(SpeechPattern s);

// Half-up rounding with a floor of `floor_value`.
int round_half_up(double x, int floor_value);

Contour render_ground_truth(const PersonaConfig& persona, const ProsodyTarget& target,
                            const Utterance& utt, std::uint64_t seed,
                            const RenderConfig& cfg = {});

}  // namespace duotrack::corpus
