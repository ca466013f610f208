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

#include "duotrack/corpus/types.hpp"

#include <numeric>

#include "duotrack/core/errors.hpp"

namespace duotrack::corpus {

namespace {

constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "neutral", "excited", "happy", "tsundere", "confused", "sad", "angry", "calm"};
constexpr std::array<std::string_view, kNumArchetypes> kArchetypeNames = {
    "tsundere", "cheerful", "reserved", "stoic", "energetic"};
constexpr std::array<std::string_view, kNumSpeechPatterns> kSpeechNames = {"formal", "casual",
                                                                           "mixed"};
constexpr std::array<std::string_view, 3> kSplitNames = {"train", "val", "test"};

template <class E, std::size_t N>
E parse_enum(const std::array<std::string_view, N>& names, std::string_view s,
             const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  throw DomainError(std::string("unknown ") + what + ": '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(Emotion e) { return kEmotionNames.at(index_of(e)); }
std::string_view to_string(Archetype a) { return kArchetypeNames.at(index_of(a)); }
std::string_view to_string(SpeechPattern s) { return kSpeechNames.at(index_of(s)); }
std::string_view to_string(Split s) { return kSplitNames.at(static_cast<std::size_t>(s)); }

Emotion parse_emotion(std::string_view s) { return parse_enum<Emotion>(kEmotionNames, s, "emotion"); }
Archetype parse_archetype(std::string_view s) {
  return parse_enum<Archetype>(kArchetypeNames, s, "archetype");
}
SpeechPattern parse_speech_pattern(std::string_view s) {
  return parse_enum<SpeechPattern>(kSpeechNames, s, "speech pattern");
}
Split parse_split(std::string_view s) { return parse_enum<Split>(kSplitNames, s, "split"); }

Emotion emotion_from_index(std::size_t i) {
  if (i >= kNumEmotions) throw DomainError("emotion index out of range");
  return static_cast<Emotion>(i);
}

Archetype archetype_from_index(std::size_t i) {
  if (i >= kNumArchetypes) throw DomainError("archetype index out of range");
  return static_cast<Archetype>(i);
}

void validate(const Contour& c) {
  if (c.durations.empty()) throw DataError("contour has no tokens");
  if (c.pauses.size() != c.durations.size()) throw DataError("pauses and durations differ in length");
  long total = 0;
  for (int d : c.durations) {
    if (d < 1) throw DataError("token duration below one frame");
    total += d;
  }
  for (int p : c.pauses) {
    if (p < 0) throw DataError("negative pause");
  }
  if (c.f0.size() != static_cast<std::size_t>(total) || c.energy.size() != c.f0.size())
    throw DataError("frame count does not match durations");
  for (double v : c.f0) {
    if (!(v > 0.0)) throw DataError("non-positive f0 frame");
  }
  for (double v : c.energy) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("energy frame outside [0, 1]");
  }
}

void validate(const PersonaConfig& p) {
  if (p.character_id.empty()) throw DataError("persona without character_id");
  if (!(p.volatility >= 0.0 && p.volatility <= 1.0))
    throw DataError("volatility outside [0, 1] for " + p.character_id);
  if (!(p.base_profile.base_f0 > 0.0)) throw DataError("base_f0 must be positive");
  if (!(p.base_profile.f0_range >= 0.0)) throw DataError("f0_range must be nonnegative");
  if (!(p.base_profile.base_rate > 0.0)) throw DataError("base_rate must be positive");
  if (p.description.empty()) throw DataError("empty description for " + p.character_id);
}

}  // namespace duotrack::corpus
