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

#include "duotrack/corpus/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "duotrack/core/errors.hpp"

namespace duotrack::corpus {

using nlohmann::json;

namespace {

void check_schema(const json& j, const char* what) {
  if (!j.contains("schema") || j.at("schema").get<int>() != kSchemaVersion)
    throw DataError(std::string(what) + ": missing or unsupported schema version");
}

}  // namespace

json to_json(const PersonaConfig& p) {
  return json{{"character_id", p.character_id},
              {"archetype", std::string(to_string(p.archetype))},
              {"volatility", p.volatility},
              {"speech_pattern", std::string(to_string(p.speech_pattern))},
              {"description", p.description},
              {"base_profile",
               {{"base_f0", p.base_profile.base_f0},
                {"f0_range", p.base_profile.f0_range},
                {"base_energy", p.base_profile.base_energy},
                {"base_rate", p.base_profile.base_rate}}},
              {"seen", p.seen}};
}

PersonaConfig persona_from_json(const json& j) {
  PersonaConfig p;
  p.character_id = j.at("character_id").get<std::string>();
  p.archetype = parse_archetype(j.at("archetype").get<std::string>());
  p.volatility = j.at("volatility").get<double>();
  p.speech_pattern = parse_speech_pattern(j.at("speech_pattern").get<std::string>());
  p.description = j.at("description").get<std::string>();
  const auto& bp = j.at("base_profile");
  p.base_profile.base_f0 = bp.at("base_f0").get<double>();
  p.base_profile.f0_range = bp.at("f0_range").get<double>();
  p.base_profile.base_energy = bp.at("base_energy").get<double>();
  p.base_profile.base_rate = bp.at("base_rate").get<double>();
  p.seen = j.at("seen").get<bool>();
  validate(p);
  return p;
}

json to_json(const ProsodyTarget& t) {
  return json{{"vad", {t.vad.valence, t.vad.arousal, t.vad.dominance}},
              {"f0_rel", t.f0_rel},
              {"e_rel", t.e_rel},
              {"rationale", t.rationale}};
}

ProsodyTarget target_from_json(const json& j) {
  ProsodyTarget t;
  const auto vad = j.at("vad").get<std::vector<double>>();
  if (vad.size() != 3) throw DataError("vad must have three components");
  t.vad = {vad[0], vad[1], vad[2]};
  t.f0_rel = j.at("f0_rel").get<double>();
  t.e_rel = j.at("e_rel").get<double>();
  t.rationale = j.at("rationale").get<std::vector<double>>();
  if (t.rationale.size() != kRationaleDim) throw DataError("rationale has wrong dimension");
  return t;
}

json to_json(const Contour& c) {
  return json{{"f0", c.f0}, {"energy", c.energy}, {"durations", c.durations}, {"pauses", c.pauses}};
}

Contour contour_from_json(const json& j) {
  Contour c;
  c.f0 = j.at("f0").get<std::vector<double>>();
  c.energy = j.at("energy").get<std::vector<double>>();
  c.durations = j.at("durations").get<std::vector<int>>();
  c.pauses = j.at("pauses").get<std::vector<int>>();
  validate(c);
  return c;
}

json to_json(const CorpusParams& p) {
  return json{{"num_characters", p.num_characters},
              {"utterances_per_character", p.utterances_per_character},
              {"unseen_fraction", p.unseen_fraction},
              {"seed", p.seed},
              {"id_prefix", p.id_prefix},
              {"render",
               {{"fps", p.render.fps},
                {"f0_jitter_hz", p.render.f0_jitter_hz},
                {"energy_jitter", p.render.energy_jitter},
                {"duration_jitter", p.render.duration_jitter},
                {"pause_jitter", p.render.pause_jitter}}}};
}

CorpusParams params_from_json(const json& j) {
  CorpusParams p;
  p.num_characters = j.value("num_characters", p.num_characters);
  p.utterances_per_character = j.value("utterances_per_character", p.utterances_per_character);
  p.unseen_fraction = j.value("unseen_fraction", p.unseen_fraction);
  p.seed = j.value("seed", p.seed);
  p.id_prefix = j.value("id_prefix", p.id_prefix);
  if (j.contains("render")) {
    const auto& r = j.at("render");
    p.render.fps = r.value("fps", p.render.fps);
    p.render.f0_jitter_hz = r.value("f0_jitter_hz", p.render.f0_jitter_hz);
    p.render.energy_jitter = r.value("energy_jitter", p.render.energy_jitter);
    p.render.duration_jitter = r.value("duration_jitter", p.render.duration_jitter);
    p.render.pause_jitter = r.value("pause_jitter", p.render.pause_jitter);
  }
  return p;
}

std::string personas_json(const Corpus& c, const json& provenance) {
  json j;
  j["schema"] = kSchemaVersion;
  j["provenance"] = provenance;
  j["params"] = to_json(c.params);
  j["personas"] = json::array();
  for (const auto& p : c.personas) j["personas"].push_back(to_json(p));
  return j.dump(2) + "\n";
}

std::string corpus_jsonl(const Corpus& c, const json& provenance) {
  std::string out = json{{"schema", kSchemaVersion}, {"kind", "header"}, {"provenance", provenance},
                         {"records", c.utterances.size()}}
                        .dump();
  out += "\n";
  for (std::size_t i = 0; i < c.utterances.size(); ++i) {
    const auto& u = c.utterances[i];
    json rec{{"schema", kSchemaVersion},
             {"kind", "utterance"},
             {"utterance_id", u.utterance_id},
             {"character_id", u.character_id},
             {"tokens", u.token_ids},
             {"emotion", std::string(to_string(u.emotion))},
             {"split", std::string(to_string(u.split))},
             {"seen", u.seen},
             {"target", to_json(c.targets[i])},
             {"contour", to_json(c.contours[i])}};
    out += rec.dump();
    out += "\n";
  }
  return out;
}

Corpus parse_corpus(std::string_view personas_text, std::string_view jsonl) {
  Corpus c;
  try {
    const json pj = json::parse(personas_text);
    check_schema(pj, "personas file");
    c.params = params_from_json(pj.at("params"));
    for (const auto& p : pj.at("personas")) c.personas.push_back(persona_from_json(p));

    std::istringstream in{std::string(jsonl)};
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      check_schema(rec, "corpus record");
      if (rec.value("kind", "") == "header") continue;
      Utterance u;
      u.utterance_id = rec.at("utterance_id").get<std::string>();
      u.character_id = rec.at("character_id").get<std::string>();
      u.token_ids = rec.at("tokens").get<std::vector<int>>();
      u.emotion = parse_emotion(rec.at("emotion").get<std::string>());
      u.split = parse_split(rec.at("split").get<std::string>());
      u.seen = rec.at("seen").get<bool>();
      if (u.token_ids.size() < 4 || u.token_ids.size() > 64)
        throw DataError("token sequence length outside [4, 64] in " + u.utterance_id);
      if (!c.has_persona(u.character_id))
        throw DataError("utterance " + u.utterance_id + " references unknown character");
      c.targets.push_back(target_from_json(rec.at("target")));
      c.contours.push_back(contour_from_json(rec.at("contour")));
      c.utterances.push_back(std::move(u));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed corpus: ") + e.what());
  }
  return c;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void save_corpus(const Corpus& c, const std::string& dir, const json& provenance) {
  std::filesystem::create_directories(dir);
  write_text_file((std::filesystem::path(dir) / "personas.json").string(), personas_json(c, provenance));
  write_text_file((std::filesystem::path(dir) / "corpus.jsonl").string(), corpus_jsonl(c, provenance));
}

Corpus load_corpus(const std::string& dir) {
  const auto base = std::filesystem::path(dir);
  return parse_corpus(read_text_file((base / "personas.json").string()),
                      read_text_file((base / "corpus.jsonl").string()));
}

}  // namespace duotrack::corpus
