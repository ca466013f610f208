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
#include <cstdint>
#include <vector>

#include "duotrack/corpus/types.hpp"

// Rule-based stand-in for the persona teacher: maps (persona, utterance) to a
// prosody target. Every function here is pure.
namespace duotrack::corpus {

// Synthetic base VAD per emotion category, in category order.
const std::array<Vad, kNumEmotions>& base_vad_table();
// Additive VAD shift per archetype; not applied to the neutral category.
Vad archetype_offset(Archetype a);

// Per-coordinate noise scale on the rationale embedding, relative to the
// unit-norm projection columns.
inline constexpr double kRationaleNoise = 0.1;

double f0_rel_from(const Vad& vad);
double e_rel_from(const Vad& vad);

// Unit-norm rationale embedding: fixed projection of the one-hot
// (archetype, emotion) pair plus noise seeded by `noise_seed`. With
// `emotion_only` the archetype column is left out.
std::vector<double> rationale_embedding(Archetype a, Emotion e, std::uint64_t noise_seed,
                                        bool emotion_only = false);

ProsodyTarget teacher_oracle(const PersonaConfig& persona, const Utterance& utt);

// Per-emotion constant target (base table row, no persona modulation) used
// when the teacher is ablated away.
ProsodyTarget constant_target(const Utterance& utt);

}  // namespace duotrack::corpus
