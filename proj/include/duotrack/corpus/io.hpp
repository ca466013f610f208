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

#include <string>
#include <string_view>

#include "duotrack/corpus/generate.hpp"
#include "json.hpp"

namespace duotrack::corpus {

nlohmann::json to_json(const PersonaConfig& p);
PersonaConfig persona_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProsodyTarget& t);
ProsodyTarget target_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Contour& c);
Contour contour_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CorpusParams& p);
CorpusParams params_from_json(const nlohmann::json& j);

// `provenance` is copied verbatim into the personas file and the JSON-lines
// header record.
std::string personas_json(const Corpus& c, const nlohmann::json& provenance = nlohmann::json::object());
std::string corpus_jsonl(const Corpus& c, const nlohmann::json& provenance = nlohmann::json::object());
Corpus parse_corpus(std::string_view personas, std::string_view jsonl);

// Writes personas.json and corpus.jsonl into `dir` (created if missing).
void save_corpus(const Corpus& c, const std::string& dir,
                 const nlohmann::json& provenance = nlohmann::json::object());
// Throws UsageError for missing files and DataError for malformed content.
Corpus load_corpus(const std::string& dir);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace duotrack::corpus
