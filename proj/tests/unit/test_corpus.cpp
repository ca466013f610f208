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

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "duotrack/core/errors.hpp"
#include "duotrack/corpus/generate.hpp"
#include "duotrack/corpus/io.hpp"
#include "duotrack/corpus/teacher.hpp"
#include "duotrack/corpus/vocab.hpp"

using namespace duotrack;
using namespace duotrack::corpus;

namespace {

CorpusParams small_params() {
  CorpusParams p;
  p.num_characters = 10;
  p.utterances_per_character = 50;
  p.seed = 7;
  return p;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

double stddev(const std::vector<double>& x) {
  double m = 0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

PersonaConfig fixed_persona() {
  PersonaConfig p;
  p.character_id = "probe";
  p.archetype = Archetype::kCheerful;
  p.volatility = 0.4;
  p.speech_pattern = SpeechPattern::kMixed;
  p.description = "probe";
  p.base_profile = {220.0, 30.0, 0.5, 5.0};
  return p;
}

Utterance fixed_utterance(Emotion e) {
  Utterance u;
  u.utterance_id = "probe_u000";
  u.character_id = "probe";
  u.emotion = e;
  u.token_ids = {60, 61, 62, 63, 64, 65, 66, 67, 68, 69, 70, 71};
  return u;
}

}  // namespace

TEST_CASE("generation is byte-identical for a fixed seed") {
  const auto a = generate_corpus(small_params());
  const auto b = generate_corpus(small_params());
  CHECK(corpus_jsonl(a) == corpus_jsonl(b));
  CHECK(personas_json(a) == personas_json(b));
  auto other = small_params();
  other.seed = 8;
  CHECK(corpus_jsonl(generate_corpus(other)) != corpus_jsonl(a));
}

TEST_CASE("splits follow 80/10/10 for seen characters and exclude unseen ones") {
  const auto c = generate_corpus(small_params());
  std::map<std::string, std::map<Split, int>> counts;
  for (const auto& u : c.utterances) counts[u.character_id][u.split]++;
  int unseen = 0;
  for (const auto& p : c.personas) {
    auto& m = counts[p.character_id];
    if (p.seen) {
      CHECK(m[Split::kTrain] == 40);
      CHECK(m[Split::kVal] == 5);
      CHECK(m[Split::kTest] == 5);
    } else {
      ++unseen;
      CHECK(m[Split::kTrain] == 0);
      CHECK(m[Split::kVal] == 0);
      CHECK(m[Split::kTest] == 50);
    }
  }
  CHECK(unseen == 3);
  for (const auto& u : c.utterances) CHECK(u.seen == c.persona(u.character_id).seen);
}

TEST_CASE("too few utterances is a configuration error") {
  auto p = small_params();
  p.utterances_per_character = 1;
  CHECK_THROWS_AS(generate_corpus(p), ConfigError);
  p = small_params();
  p.num_characters = 2;
  CHECK_THROWS_AS(generate_corpus(p), ConfigError);
}

TEST_CASE("utterance tokens and emotion hints") {
  const auto c = generate_corpus(small_params());
  for (const auto& u : c.utterances) {
    CHECK(u.token_ids.size() >= vocab::kMinLength);
    CHECK(u.token_ids.size() <= vocab::kMaxLength);
    CHECK(vocab::emotion_hint(u.token_ids) == index_of(u.emotion));
  }
  CHECK(vocab::emotion_hint(std::vector<int>{0, 0, 100}) == vocab::kUnknownHint);
  CHECK_THROWS_AS(vocab::emotion_hint(std::vector<int>{1, 999}), DomainError);
}

TEST_CASE("base VAD table rows are pairwise separated") {
  const auto& t = base_vad_table();
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      const double dv = t[i].valence - t[j].valence, da = t[i].arousal - t[j].arousal,
                   dd = t[i].dominance - t[j].dominance;
      CHECK(std::sqrt(dv * dv + da * da + dd * dd) >= 0.15);
    }
  }
}

TEST_CASE("teacher oracle rules") {
  auto p = fixed_persona();
  p.volatility = 0.0;
  for (std::size_t a = 0; a < kNumArchetypes; ++a) {
    p.archetype = archetype_from_index(a);
    const auto t = teacher_oracle(p, fixed_utterance(Emotion::kNeutral));
    const auto& row = base_vad_table()[0];
    CHECK(t.vad.valence == row.valence);
    CHECK(t.vad.arousal == row.arousal);
    CHECK(t.vad.dominance == row.dominance);
  }

  for (std::size_t a = 0; a < kNumArchetypes; ++a) {
    p.archetype = archetype_from_index(a);
    p.volatility = 0.0;
    const double calm = teacher_oracle(p, fixed_utterance(Emotion::kExcited)).vad.arousal;
    p.volatility = 1.0;
    const double wild = teacher_oracle(p, fixed_utterance(Emotion::kExcited)).vad.arousal;
    CHECK(wild > calm);
  }

  p = fixed_persona();
  auto u1 = fixed_utterance(Emotion::kSad);
  auto u2 = u1;
  u2.utterance_id = "probe_u001";
  const auto t1 = teacher_oracle(p, u1);
  const auto t2 = teacher_oracle(p, u2);
  CHECK(t1.rationale != t2.rationale);
  CHECK(cosine(t1.rationale, t2.rationale) >= 0.95);
  double n2 = 0;
  for (double v : t1.rationale) n2 += v * v;
  CHECK(std::abs(n2 - 1.0) < 1e-12);

  const auto again = teacher_oracle(p, u1);
  CHECK(again.rationale == t1.rationale);
  CHECK(again.vector() == t1.vector());

  CHECK_THROWS_AS(parse_emotion("embarrassed"), DomainError);
  CHECK_THROWS_AS(parse_archetype("kuudere"), DomainError);
}

TEST_CASE("generated targets stay in their domains") {
  const auto c = generate_corpus(small_params());
  for (const auto& t : c.targets) {
    for (double v : t.vad.array()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(std::abs(t.f0_rel) <= 1.0);
    CHECK(std::abs(t.e_rel) <= 1.0);
  }
}

TEST_CASE("ground-truth rendering") {
  auto p = fixed_persona();
  RenderConfig quiet;
  quiet.f0_jitter_hz = 0.0;
  quiet.energy_jitter = 0.0;
  auto u = fixed_utterance(Emotion::kHappy);
  auto t = teacher_oracle(p, u);
  t.f0_rel = 0.0;
  const auto c = render_ground_truth(p, t, u, 3, quiet);
  double mean = 0;
  for (double v : c.f0) mean += v;
  mean /= static_cast<double>(c.f0.size());
  CHECK(std::abs(mean - p.base_profile.base_f0) < 1e-9);

  long total = 0;
  for (int d : c.durations) total += d;
  CHECK(c.f0.size() == static_cast<std::size_t>(total));
  CHECK(c.energy.size() == c.f0.size());
  CHECK_NOTHROW(validate(c));

  auto lo = t, hi = t;
  lo.vad.arousal = 0.1;
  hi.vad.arousal = 0.9;
  CHECK(stddev(render_ground_truth(p, hi, u, 3).f0) > stddev(render_ground_truth(p, lo, u, 3).f0));
}

TEST_CASE("per-character base profiles are pairwise distinct") {
  CorpusParams params;
  params.num_characters = 64;
  params.utterances_per_character = 10;
  params.seed = 11;
  const auto c = generate_corpus(params);
  for (std::size_t i = 0; i < c.personas.size(); ++i) {
    for (std::size_t j = i + 1; j < c.personas.size(); ++j) {
      const auto& a = c.personas[i].base_profile;
      const auto& b = c.personas[j].base_profile;
      CHECK((a.base_f0 != b.base_f0 || a.base_energy != b.base_energy || a.base_rate != b.base_rate));
    }
  }
}

TEST_CASE("corpus files round trip") {
  const auto c = generate_corpus(small_params());
  const auto dir = std::filesystem::temp_directory_path() / "duotrack_corpus_rt";
  save_corpus(c, dir.string(), {{"version", "test"}});
  const auto back = load_corpus(dir.string());
  CHECK(corpus_jsonl(back) == corpus_jsonl(c));
  CHECK(personas_json(back) == personas_json(c));
  std::filesystem::remove_all(dir);

  CHECK_THROWS_AS(load_corpus("/nonexistent/dir"), UsageError);
  CHECK_THROWS_AS(parse_corpus("{\"schema\": 99}", ""), DataError);
}

TEST_CASE("encoder corpus is disjoint by construction") {
  const auto params = small_params();
  const auto enc = generate_corpus(encoder_corpus_params(params));
  const auto main = generate_corpus(params);
  std::set<std::string> ids;
  for (const auto& p : main.personas) ids.insert(p.character_id);
  for (const auto& p : enc.personas) CHECK(ids.count(p.character_id) == 0);
}
