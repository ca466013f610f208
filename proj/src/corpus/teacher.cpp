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

#include "duotrack/corpus/teacher.hpp"

#include <algorithm>
#include <cmath>

#include "duotrack/core/hash.hpp"
#include "duotrack/core/rng.hpp"

namespace duotrack::corpus {

namespace {

constexpr std::size_t kOneHotDim = kNumArchetypes + kNumEmotions;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// 768 x 13 Gaussian projection with column norms near one. Built once from a
// fixed seed so the embedding space is frozen across runs.
const std::vector<double>& projection() {
  static const std::vector<double> table = [] {
    Rng rng(fnv1a("rationale-projection/v1"));
    std::vector<double> t(kRationaleDim * kOneHotDim);
    const double s = 1.0 / std::sqrt(static_cast<double>(kRationaleDim));
    for (double& v : t) v = s * rng.normal();
    return t;
  }();
  return table;
}

double volatility_scale(double x, double volatility) {
  return clamp01(x + volatility * (x - 0.5));
}

}  // namespace

const std::array<Vad, kNumEmotions>& base_vad_table() {
  static const std::array<Vad, kNumEmotions> table = {{
      {0.50, 0.45, 0.50},  // neutral
      {0.80, 0.90, 0.65},  // excited
      {0.85, 0.65, 0.60},  // happy
      {0.40, 0.70, 0.75},  // tsundere
      {0.40, 0.50, 0.25},  // confused
      {0.15, 0.25, 0.25},  // sad
      {0.10, 0.85, 0.85},  // angry
      {0.65, 0.20, 0.45},  // calm
  }};
  return table;
}

Vad archetype_offset(Archetype a) {
  switch (a) {
    case Archetype::kTsundere: return {-0.05, 0.05, 0.08};
    case Archetype::kCheerful: return {0.08, 0.05, 0.00};
    case Archetype::kReserved: return {-0.03, -0.08, -0.05};
    case Archetype::kStoic: return {0.00, -0.10, 0.05};
    case Archetype::kEnergetic: return {0.03, 0.06, 0.03};
  }
  return {0.0, 0.0, 0.0};
}

double f0_rel_from(const Vad& vad) {
  return std::clamp(0.3 * (vad.arousal - 0.5) + 0.1 * (vad.valence - 0.5), -1.0, 1.0);
}

double e_rel_from(const Vad& vad) {
  return std::clamp(0.4 * (vad.arousal - 0.5) + 0.1 * (vad.dominance - 0.5), -1.0, 1.0);
}

std::vector<double> rationale_embedding(Archetype a, Emotion e, std::uint64_t noise_seed,
                                        bool emotion_only) {
  const auto& p = projection();
  const std::size_t ca = index_of(a);
  const std::size_t ce = kNumArchetypes + index_of(e);
  Rng rng(noise_seed);
  const double noise = kRationaleNoise / std::sqrt(static_cast<double>(kRationaleDim));
  std::vector<double> out(kRationaleDim);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < kRationaleDim; ++i) {
    double v = p[i * kOneHotDim + ce];
    if (!emotion_only) v += p[i * kOneHotDim + ca];
    v += noise * rng.normal();
    out[i] = v;
    norm2 += v * v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : out) v *= inv;
  return out;
}

ProsodyTarget teacher_oracle(const PersonaConfig& persona, const Utterance& utt) {
  Vad vad = base_vad_table()[index_of(utt.emotion)];
  if (utt.emotion != Emotion::kNeutral) {
    const Vad off = archetype_offset(persona.archetype);
    vad.valence = clamp01(vad.valence + off.valence);
    vad.arousal = clamp01(vad.arousal + off.arousal);
    vad.dominance = clamp01(vad.dominance + off.dominance);
  }
  vad.valence = volatility_scale(vad.valence, persona.volatility);
  vad.arousal = volatility_scale(vad.arousal, persona.volatility);
  vad.dominance = volatility_scale(vad.dominance, persona.volatility);

  ProsodyTarget t;
  t.vad = vad;
  t.f0_rel = f0_rel_from(vad);
  t.e_rel = e_rel_from(vad);
  t.rationale = rationale_embedding(persona.archetype, utt.emotion,
                                    fnv1a(utt.utterance_id, fnv1a("rationale-noise")));
  return t;
}

ProsodyTarget constant_target(const Utterance& utt) {
  ProsodyTarget t;
  t.vad = base_vad_table()[index_of(utt.emotion)];
  t.f0_rel = f0_rel_from(t.vad);
  t.e_rel = e_rel_from(t.vad);
  t.rationale = rationale_embedding(Archetype::kTsundere, utt.emotion,
                                    fnv1a(utt.utterance_id, fnv1a("rationale-noise")), true);
  return t;
}

}  // namespace duotrack::corpus
