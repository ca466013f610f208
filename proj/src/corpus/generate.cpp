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

#include "duotrack/corpus/generate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "duotrack/core/errors.hpp"
#include "duotrack/core/rng.hpp"
#include "duotrack/corpus/teacher.hpp"
#include "duotrack/corpus/vocab.hpp"

namespace duotrack::corpus {

namespace {

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(p.begin(), p.end());
  return p;
}

// Value inside stratum `k` of `n` equal strata on [lo, hi], kept away from the
// stratum edges so neighbouring characters never coincide.
double stratified(double lo, double hi, std::size_t k, std::size_t n, Rng& rng) {
  const double u = rng.uniform(0.2, 0.8);
  return lo + (hi - lo) * (static_cast<double>(k) + u) / static_cast<double>(n);
}

std::size_t bin_of(double x, double lo, double hi, std::size_t bins) {
  const double f = (x - lo) / (hi - lo);
  const auto b = static_cast<long>(std::floor(f * static_cast<double>(bins)));
  return static_cast<std::size_t>(std::clamp<long>(b, 0, static_cast<long>(bins) - 1));
}

std::vector<int> make_tokens(Emotion e, Rng& rng) {
  const std::size_t len = 6 + rng.below(15);
  std::vector<int> tokens(len);
  const int filler_span = vocab::kVocabSize - vocab::kFirstFiller;
  for (int& t : tokens) t = vocab::kFirstFiller + static_cast<int>(rng.below(filler_span));
  std::vector<std::size_t> pos(len);
  std::iota(pos.begin(), pos.end(), 0);
  rng.shuffle(pos.begin(), pos.end());
  const std::size_t cues = 2 + rng.below(3);
  std::size_t p = 0;
  for (; p < cues; ++p) {
    tokens[pos[p]] = vocab::cue_token(e, static_cast<int>(rng.below(vocab::kCuesPerEmotion)));
  }
  if (rng.bernoulli(0.3)) {
    auto other = emotion_from_index((index_of(e) + 1 + rng.below(kNumEmotions - 1)) % kNumEmotions);
    tokens[pos[p]] = vocab::cue_token(other, static_cast<int>(rng.below(vocab::kCuesPerEmotion)));
  }
  return tokens;
}

}  // namespace

std::string character_id(std::string_view prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%03zu", index);
  return std::string(prefix) + buf;
}

const PersonaConfig& Corpus::persona(std::string_view id) const {
  return personas[persona_index(id)];
}

std::size_t Corpus::persona_index(std::string_view id) const {
  for (std::size_t i = 0; i < personas.size(); ++i) {
    if (personas[i].character_id == id) return i;
  }
  throw DataError("unknown character '" + std::string(id) + "'");
}

bool Corpus::has_persona(std::string_view id) const {
  return std::any_of(personas.begin(), personas.end(),
                     [&](const PersonaConfig& p) { return p.character_id == id; });
}

std::vector<std::size_t> Corpus::select(Split split, bool seen) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (utterances[i].split == split && utterances[i].seen == seen) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Corpus::by_character(std::string_view id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (utterances[i].character_id == id) out.push_back(i);
  }
  return out;
}

std::vector<std::string> Corpus::character_ids(bool seen) const {
  std::vector<std::string> out;
  for (const auto& p : personas) {
    if (p.seen == seen) out.push_back(p.character_id);
  }
  return out;
}

std::string describe(const PersonaConfig& p, const ProfileRanges& r) {
  static constexpr const char* kPitch[] = {"deep", "low", "mid-pitched", "bright", "high-pitched"};
  static constexpr const char* kRange[] = {"monotone", "steady", "lilting", "expressive"};
  static constexpr const char* kEnergy[] = {"soft-spoken", "gentle", "clear", "loud"};
  static constexpr const char* kRate[] = {"slow", "measured", "brisk", "rapid"};
  static constexpr const char* kTemper[] = {"composed", "even-tempered", "moody", "volatile"};
  static constexpr const char* kArchetype[][2] = {{"tsundere", "prickly"},
                                                  {"cheerful", "sunny"},
                                                  {"reserved", "quiet"},
                                                  {"stoic", "impassive"},
                                                  {"energetic", "lively"}};
  const auto& bp = p.base_profile;
  const auto& arch = kArchetype[index_of(p.archetype)];
  std::string s = "a ";
  s += arch[0];
  s += " ";
  s += arch[1];
  s += " character with a ";
  s += kPitch[bin_of(bp.base_f0, r.f0_lo, r.f0_hi, 5)];
  s += " ";
  s += kRange[bin_of(bp.f0_range, r.range_lo, r.range_hi, 4)];
  s += " voice, ";
  s += kEnergy[bin_of(bp.base_energy, r.energy_lo, r.energy_hi, 4)];
  s += " and ";
  s += kRate[bin_of(bp.base_rate, r.rate_lo, r.rate_hi, 4)];
  s += ", ";
  s += kTemper[bin_of(p.volatility, 0.0, 1.0, 4)];
  s += ", ";
  s += to_string(p.speech_pattern);
  s += " speech";
  return s;
}

Corpus generate_corpus(const CorpusParams& params) {
  const std::size_t n_chars = params.num_characters;
  const std::size_t n_utt = params.utterances_per_character;
  if (n_chars < 3) throw ConfigError("num_characters must be at least 3");
  if (n_utt < 10)
    throw ConfigError("utterances_per_character must be at least 10 to form an 80/10/10 split (got " +
                      std::to_string(n_utt) + ")");
  if (!(params.unseen_fraction >= 0.0 && params.unseen_fraction < 1.0))
    throw ConfigError("unseen_fraction must be in [0, 1)");
  const auto n_unseen =
      static_cast<std::size_t>(std::llround(static_cast<double>(n_chars) * params.unseen_fraction));
  if (n_chars - n_unseen < 2) throw ConfigError("need at least two seen characters");

  Corpus corpus;
  corpus.params = params;
  const ProfileRanges ranges;

  Rng prng(Rng::derive(params.seed, "personas"));
  const auto pf0 = permutation(n_chars, prng);
  const auto prange = permutation(n_chars, prng);
  const auto penergy = permutation(n_chars, prng);
  const auto prate = permutation(n_chars, prng);
  const auto pvol = permutation(n_chars, prng);
  const auto parch = permutation(n_chars, prng);
  for (std::size_t i = 0; i < n_chars; ++i) {
    PersonaConfig p;
    p.character_id = character_id(params.id_prefix, i);
    p.archetype = archetype_from_index(parch[i] % kNumArchetypes);
    p.speech_pattern = static_cast<SpeechPattern>(prng.below(kNumSpeechPatterns));
    p.base_profile.base_f0 = stratified(ranges.f0_lo, ranges.f0_hi, pf0[i], n_chars, prng);
    p.base_profile.f0_range = stratified(ranges.range_lo, ranges.range_hi, prange[i], n_chars, prng);
    p.base_profile.base_energy =
        stratified(ranges.energy_lo, ranges.energy_hi, penergy[i], n_chars, prng);
    p.base_profile.base_rate = stratified(ranges.rate_lo, ranges.rate_hi, prate[i], n_chars, prng);
    p.volatility = stratified(0.0, 1.0, pvol[i], n_chars, prng);
    p.seen = i < n_chars - n_unseen;
    p.description = describe(p, ranges);
    corpus.personas.push_back(std::move(p));
  }

  const std::size_t n_val = n_utt / 10;
  const std::size_t n_train = n_utt - 2 * n_val;
  for (const auto& p : corpus.personas) {
    Rng urng(Rng::derive(params.seed, "utterances:" + p.character_id));
    std::vector<std::size_t> emotions(n_utt);
    for (std::size_t k = 0; k < n_utt; ++k) emotions[k] = k % kNumEmotions;
    urng.shuffle(emotions.begin(), emotions.end());
    for (std::size_t k = 0; k < n_utt; ++k) {
      Utterance u;
      char buf[32];
      std::snprintf(buf, sizeof buf, "_u%03zu", k);
      u.utterance_id = p.character_id + buf;
      u.character_id = p.character_id;
      u.emotion = emotion_from_index(emotions[k]);
      u.token_ids = make_tokens(u.emotion, urng);
      u.seen = p.seen;
      if (!p.seen) {
        u.split = Split::kTest;
      } else {
        u.split = k < n_train ? Split::kTrain : (k < n_train + n_val ? Split::kVal : Split::kTest);
      }
      ProsodyTarget t = teacher_oracle(p, u);
      Contour c = render_ground_truth(p, t, u, Rng::derive(params.seed, "render:" + u.utterance_id),
                                      params.render);
      corpus.utterances.push_back(std::move(u));
      corpus.targets.push_back(std::move(t));
      corpus.contours.push_back(std::move(c));
    }
  }
  return corpus;
}

CorpusParams encoder_corpus_params(const CorpusParams& main) {
  CorpusParams p;
  p.num_characters = 48;
  p.utterances_per_character = 40;
  p.unseen_fraction = 0.0;
  p.seed = Rng::derive(main.seed, "encoder-corpus");
  p.id_prefix = "enc";
  p.render = main.render;
  return p;
}

CorpusParams timbre_corpus_params(const CorpusParams& main) {
  CorpusParams p = encoder_corpus_params(main);
  p.seed = Rng::derive(main.seed, "timbre-corpus");
  p.id_prefix = "tim";
  return p;
}

}  // namespace duotrack::corpus
