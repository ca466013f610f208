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
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "duotrack/adapter/adapter.hpp"
#include "duotrack/corpus/generate.hpp"
#include "duotrack/prosodyflow/hierarchical.hpp"
#include "duotrack/timbre/codebook.hpp"
#include "duotrack/timbre/encoder.hpp"
#include "json.hpp"

namespace duotrack::pipeline {

struct LibraryEntry {
  std::string clip_id;
  std::string character_id;
  corpus::Emotion emotion = corpus::Emotion::kNeutral;
  std::array<double, 3> vad{};
  corpus::Contour contour;
};

// Reference clips grouped by character, sorted by (character_id, clip_id).
class ReferenceLibrary {
 public:
  ReferenceLibrary() = default;
  explicit ReferenceLibrary(std::vector<LibraryEntry> entries);

  const std::vector<LibraryEntry>& entries() const { return entries_; }
  // Empty span for unknown characters.
  std::span<const LibraryEntry> character(const std::string& character_id) const;
  std::vector<std::string> characters() const;

 private:
  std::vector<LibraryEntry> entries_;
  std::map<std::string, std::pair<std::size_t, std::size_t>> ranges_;
};

// Index of the entry nearest to `vad` in Euclidean distance; equal distances
// go to the smaller clip_id. Throws ConfigError for an empty library.
std::size_t select_reference(std::span<const LibraryEntry> entries, const std::array<double, 3>& vad);

// Reference clips per character: the train split for seen characters and the
// first `unseen_clips` test utterances for unseen ones.
struct Enrollment {
  std::map<std::string, std::vector<std::size_t>> clips;
  bool contains(std::size_t utterance_index) const;
};

Enrollment make_enrollment(const corpus::Corpus& corpus, std::size_t unseen_clips = 3);

// Test-split utterances of seen (or unseen) characters that are not
// enrollment clips.
std::vector<std::size_t> evaluation_indices(const corpus::Corpus& corpus, const Enrollment& e,
                                            bool seen);

// VAD values come from `targets`, one per utterance.
ReferenceLibrary build_library(const corpus::Corpus& corpus, const Enrollment& enrollment,
                               const std::vector<corpus::ProsodyTarget>& targets);

struct Voice {
  timbre::TimbreCode code;
  corpus::BaseProfile profile;  // decoded from the quantized code
};

struct Models {
  adapter::Adapter adapter;
  flow::ProsodyFlow flow;
  timbre::TimbreEncoder timbre;
  timbre::SQCodebook codebook;
};

// Timbre code and decoded profile per character from its library clips.
std::map<std::string, Voice> build_voices(const Models& models, const ReferenceLibrary& library);

enum class VadSource { kFlow, kAdapter };
enum class ReferenceMode { kNearest, kRandom };

struct PipelineConfig {
  double timbre_weight = 0.7;  // the reference statistics get the rest
  VadSource vad_source = VadSource::kFlow;
  ReferenceMode reference_mode = ReferenceMode::kNearest;
  corpus::RenderConfig render;  // frame rate and mock-backbone jitter
};

nlohmann::json to_json(const PipelineConfig& c);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

// Identity-control base: profile blended with the reference statistics,
// rendered with seeded jitter. Durations use duration_scale and pauses
// pause_scale so that the control stage reuses the same draws.
corpus::Contour render_base(std::size_t tokens, const corpus::BaseProfile& profile,
                            corpus::SpeechPattern pattern, const LibraryEntry& ref,
                            double duration_scale, double pause_scale, std::uint64_t seed,
                            const PipelineConfig& cfg);

// Base contour followed by the pitch and energy controls and the fine curve
// (pitch then energy, resampled linearly to the frame count). Pitch is scaled
// by the profile's f0 range.
corpus::Contour fuse_and_render(std::size_t tokens, const corpus::BaseProfile& profile,
                                corpus::SpeechPattern pattern, const adapter::ControlParams& control,
                                std::span<const double> fine, const LibraryEntry& ref,
                                std::uint64_t seed, const PipelineConfig& cfg);

struct SynthesisTrace {
  std::string utterance_id;
  std::string character_id;
  adapter::ControlParams control;
  std::array<double, corpus::kProsodyDim> p_hat{};
  std::vector<double> coarse;
  std::vector<double> fine;
  std::array<double, 3> vad_target{};
  std::string selected_ref;
  timbre::TimbreCode timbre;
  corpus::Contour contour;
  std::map<std::string, double> timing_ms;  // per stage
};

// Runs adapter, flow, reference selection and rendering for one utterance.
// The persona is only read through its config fields; the character needs
// clips in `library` and an entry in `voices`, otherwise ConfigError.
SynthesisTrace infer(const corpus::PersonaConfig& persona, const corpus::Utterance& utterance,
                     const Models& models, const ReferenceLibrary& library,
                     const std::map<std::string, Voice>& voices, std::uint64_t seed,
                     const PipelineConfig& cfg = {});

nlohmann::json trace_json(const SynthesisTrace& t, bool with_timing = true);
std::string contour_csv(const corpus::Contour& c);
// Pitch curves of the rendered contours, one polyline each.
std::string contour_svg(const std::vector<std::pair<std::string, corpus::Contour>>& curves);

void save_models(const Models& m, const std::string& dir);
Models load_models(const std::string& dir);

}  // namespace duotrack::pipeline
