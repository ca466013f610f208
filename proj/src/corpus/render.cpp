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

#include "duotrack/corpus/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "duotrack/core/rng.hpp"

namespace duotrack::corpus {

namespace {

struct Shape {
  double slope, sin1, cos1, sin2;
};

constexpr std::array<Shape, kNumEmotions> kShapes = {{
    {-0.6, 0.3, 0.0, 0.0},   // neutral: gentle declination
    {0.4, 0.6, 0.2, 0.8},    // excited
    {0.3, 0.7, 0.1, 0.3},    // happy
    {-0.3, -0.5, 0.6, 0.5},  // tsundere
    {1.0, 0.2, -0.3, 0.1},   // confused: final rise
    {-0.8, 0.1, 0.0, 0.0},   // sad
    {-0.5, 0.5, 0.6, 0.7},   // angry
    {-0.3, 0.2, 0.1, 0.0},   // calm
}};

}  // namespace

std::vector<double> emotion_template(Emotion e, std::size_t frames) {
  std::vector<double> out(frames, 0.0);
  if (frames < 2) return out;
  const Shape& s = kShapes[index_of(e)];
  const double two_pi = 2.0 * std::numbers::pi;
  double mean = 0.0;
  for (std::size_t i = 0; i < frames; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(frames);
    out[i] = s.slope * (t - 0.5) + s.sin1 * std::sin(two_pi * t) + s.cos1 * std::cos(two_pi * t) +
             s.sin2 * std::sin(2.0 * two_pi * t);
    mean += out[i];
  }
  mean /= static_cast<double>(frames);
  double ss = 0.0;
  for (double& v : out) {
    v -= mean;
    ss += v * v;
  }
  const double rms = std::sqrt(ss / static_cast<double>(frames));
  if (rms < 1e-12) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  for (double& v : out) v /= rms;
  return out;
}

double pause_mean_frames(SpeechPattern s) {
  switch (s) {
    case SpeechPattern::kFormal: return 4.0;
    case SpeechPattern::kCasual: return 2.0;
    case SpeechPattern::kMixed: return 3.0;
  }
  return 3.0;
}

int round_half_up(double x, int floor_value) {
  return std::max(floor_value, static_cast<int>(std::floor(x + 0.5)));
}

Contour render_ground_truth(const PersonaConfig& persona, const ProsodyTarget& target,
                            const Utterance& utt, std::uint64_t seed, const RenderConfig& cfg) {
  Rng rng(seed);
  const BaseProfile& bp = persona.base_profile;
  const double a = target.vad.arousal;
  const double v = target.vad.valence;

  Contour c;
  const std::size_t n = utt.token_ids.size();
  c.durations.resize(n);
  c.pauses.resize(n);
  const double frames_per_token = cfg.fps / bp.base_rate * duration_factor(a);
  const double pause_mean = pause_mean_frames(persona.speech_pattern) * pause_factor(a, v);
  long total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = frames_per_token * std::exp(cfg.duration_jitter * rng.normal());
    c.durations[i] = round_half_up(d, 1);
    total += c.durations[i];
    const double p = pause_mean * (1.0 + cfg.pause_jitter * rng.normal());
    c.pauses[i] = round_half_up(std::max(0.0, p), 0);
  }

  const auto frames = static_cast<std::size_t>(total);
  const auto shape = emotion_template(utt.emotion, frames);
  const double f0_center = bp.base_f0 * (1.0 + target.f0_rel);
  const double f0_amp = bp.f0_range * expressivity(a);
  const double e_center = bp.base_energy * (1.0 + target.e_rel);
  const double e_amp = 0.1 * expressivity(a);
  c.f0.resize(frames);
  c.energy.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const double f = f0_center + f0_amp * shape[i] + cfg.f0_jitter_hz * rng.normal();
    c.f0[i] = std::max(40.0, f);
    const double e = e_center + e_amp * shape[i] + cfg.energy_jitter * rng.normal();
    c.energy[i] = std::clamp(e, 0.0, 1.0);
  }
  return c;
}

}  // namespace duotrack::corpus
