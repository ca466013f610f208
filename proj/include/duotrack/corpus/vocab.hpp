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

#include "duotrack/corpus/types.hpp"

// Synthetic token space: 0 is padding, then a block of emotion cue tokens
// (kCuesPerEmotion per category, in category order), then neutral filler.
namespace duotrack::corpus::vocab {

inline constexpr int kPad = 0;
inline constexpr int kCuesPerEmotion = 6;
inline constexpr int kFirstCue = 1;
inline constexpr int kFirstFiller = kFirstCue + kCuesPerEmotion * static_cast<int>(kNumEmotions);
inline constexpr int kVocabSize = 128;
inline constexpr std::size_t kMinLength = 4;
inline constexpr std::size_t kMaxLength = 64;
// Hint value when no cue token is present.
inline constexpr std::size_t kUnknownHint = kNumEmotions;
inline constexpr std::size_t kNumHints = kNumEmotions + 1;

inline bool is_cue(int token) { return token >= kFirstCue && token < kFirstFiller; }
inline Emotion cue_emotion(int token) {
  return emotion_from_index(static_cast<std::size_t>((token - kFirstCue) / kCuesPerEmotion));
}
inline int cue_token(Emotion e, int k) {
  return kFirstCue + static_cast<int>(index_of(e)) * kCuesPerEmotion + k;
}

// Argmax of per-category cue counts, ties toward the lower category index.
// Padding is ignored. Throws DomainError for ids outside the vocabulary.
std::size_t emotion_hint(std::span<const int> tokens);

void check_tokens(std::span<const int> tokens);

}  // namespace duotrack::corpus::vocab
