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

#include "duotrack/corpus/vocab.hpp"

#include <array>
#include <string>

#include "duotrack/core/errors.hpp"

namespace duotrack::corpus::vocab {

void check_tokens(std::span<const int> tokens) {
  for (int t : tokens) {
    if (t < 0 || t >= kVocabSize)
      throw DomainError("token id " + std::to_string(t) + " outside vocabulary");
  }
}

std::size_t emotion_hint(std::span<const int> tokens) {
  check_tokens(tokens);
  std::array<int, kNumEmotions> counts{};
  for (int t : tokens) {
    if (is_cue(t)) ++counts[index_of(cue_emotion(t))];
  }
  std::size_t best = kUnknownHint;
  int best_count = 0;
  for (std::size_t e = 0; e < kNumEmotions; ++e) {
    if (counts[e] > best_count) {
      best = e;
      best_count = counts[e];
    }
  }
  return best;
}

}  // namespace duotrack::corpus::vocab
