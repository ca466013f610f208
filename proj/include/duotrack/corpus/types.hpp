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
#include <string>
#include <string_view>
#include <vector>

namespace duotrack::corpus {

inline constexpr std::size_t kNumEmotions = 8;
inline constexpr std::size_t kNumArchetypes = 5;
inline constexpr std::size_t kNumSpeechPatterns = 3;
inline constexpr std::size_t kRationaleDim = 768;
inline constexpr std::size_t kProsodyDim = 5;

enum class Emotion { kNeutral, kExcited, kHappy, kTsundere, kConfused, kSad, kAngry, kCalm };
enum class Archetype { kTsundere, kCheerful, kReserved, kStoic, kEnergetic };
enum class SpeechPattern { kFormal, kCasual, kMixed };
enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Emotion e);
std::string_view to_string(Archetype a);
std::string_view to_string(SpeechPattern s);
std::string_view to_string(Split s);

// Parsers throw DomainError on unknown names.
Emotion parse_emotion(std::string_view s);
Archetype parse_archetype(std::string_view s);
SpeechPattern parse_speech_pattern(std::string_view s);
Split parse_split(std::string_view s);

Emotion emotion_from_index(std::size_t i);
Archetype archetype_from_index(std::size_t i);
inline std::size_t index_of(Emotion e) { return static_cast<std::size_t>(e); }
inline std::size_t index_of(Archetype a) { return static_cast<std::size_t>(a); }
inline std::size_t index_of(SpeechPattern s) { return static_cast<std::size_t>(s); }

struct BaseProfile {
  double base_f0 = 200.0;     // Hz
  double f0_range = 30.0;     // Hz
  double base_energy = 0.5;   // [0, 1]
  double base_rate = 5.0;     // syllables per second
};

struct PersonaConfig {
  std::string character_id;
  Archetype archetype = Archetype::kCheerful;
  double volatility = 0.0;
  SpeechPattern speech_pattern = SpeechPattern::kCasual;
  std::string description;
  BaseProfile base_profile;
  bool seen = true;
};

struct Utterance {
  std::string utterance_id;
  std::string character_id;
  std::vector<int> token_ids;
  Emotion emotion = Emotion::kNeutral;
  Split split = Split::kTrain;
  bool seen = true;
};

struct Vad {
  double valence = 0.5;
  double arousal = 0.5;
  double dominance = 0.5;
  std::array<double, 3> array() const { return {valence, arousal, dominance}; }
};

struct ProsodyTarget {
  Vad vad;
  double f0_rel = 0.0;
  double e_rel = 0.0;
  std::vector<double> rationale;  // kRationaleDim, unit norm

  // {V, A, D, f0_rel, e_rel}
  std::array<double, kProsodyDim> vector() const {
    return {vad.valence, vad.arousal, vad.dominance, f0_rel, e_rel};
  }
};

// Frame-level prosody trace. Durations are frames per token and pauses are
// silent frames after each token; pauses are not part of the f0/energy frames.
struct Contour {
  std::vector<double> f0;
  std::vector<double> energy;
  std::vector<int> durations;
  std::vector<int> pauses;

  std::size_t frames() const { return f0.size(); }
};

// Throws DataError when a contour breaks its length or positivity rules.
void validate(const Contour& c);
void validate(const PersonaConfig& p);

}  // namespace duotrack::corpus
