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
#include <string>
#include <string_view>
#include <vector>

#include "duotrack/corpus/render.hpp"
#include "duotrack/corpus/types.hpp"

namespace duotrack::corpus {

inline constexpr int kSchemaVersion = 1;

// Sampling ranges of the per-character base profile.
struct ProfileRanges {
  double f0_lo = 140.0, f0_hi = 320.0;
  double range_lo = 15.0, range_hi = 45.0;
  double energy_lo = 0.3, energy_hi = 0.8;
  double rate_lo = 3.5, rate_hi = 7.0;
};

struct CorpusParams {
  std::size_t num_characters = 14;
  std::size_t utterances_per_character = 50;
  double unseen_fraction = 0.3;
  std::uint64_t seed = 7;
  std::string id_prefix = "char";
  RenderConfig render;
};

struct Corpus {
  int schema_version = kSchemaVersion;
  CorpusParams params;
  std::vector<PersonaConfig> personas;
  // The three vectors below are parallel to `utterances`.
  std::vector<Utterance> utterances;
  std::vector<ProsodyTarget> targets;
  std::vector<Contour> contours;

  // Throws DataError for unknown ids.
  const PersonaConfig& persona(std::string_view character_id) const;
  std::size_t persona_index(std::string_view character_id) const;
  bool has_persona(std::string_view character_id) const;

  std::vector<std::size_t> select(Split split, bool seen) const;
  std::vector<std::size_t> by_character(std::string_view character_id) const;
  std::vector<std::string> character_ids(bool seen) const;
};

// Throws ConfigError when the counts cannot be split.
Corpus generate_corpus(const CorpusParams& params);

// Parameters of the disjoint corpus the evaluation encoders train on.
CorpusParams encoder_corpus_params(const CorpusParams& main);
// Parameters of the disjoint corpus the timbre encoder is pretrained on.
CorpusParams timbre_corpus_params(const CorpusParams& main);

// Short adjective description derived from a persona's traits.
std::string describe(const PersonaConfig& p, const ProfileRanges& ranges = {});

std::string character_id(std::string_view prefix, std::size_t index);

}  // namespace duotrack::corpus
