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

#include <cstdint>
#include <string>
#include <vector>

#include "duotrack/adapter/train.hpp"
#include "duotrack/metrics/encoders.hpp"
#include "duotrack/metrics/report.hpp"
#include "duotrack/pipeline/pipeline.hpp"
#include "duotrack/retrieval/retrieval.hpp"
#include "json.hpp"

// End-to-end training, evaluation and ablation runs over one corpus.
namespace duotrack::experiment {

enum class Ablation { kFull, kNoContrastive, kNoTeacher, kRandomReference, kShuffledPersona };

const std::vector<Ablation>& all_ablations();
std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);  // UsageError when unknown

struct SystemConfig {
  adapter::AdapterConfig adapter;
  flow::FlowConfig flow;
  metrics::ContourNetConfig timbre = timbre::default_timbre_config();
  std::size_t codebook_levels = timbre::kCodebookLevels;
  pipeline::PipelineConfig pipeline;
  std::size_t unseen_enrollment = 3;
  retrieval::ProjectionConfig projection;

  void check() const;
};

nlohmann::json to_json(const SystemConfig& c);
// Missing keys keep their defaults; ConfigError on invalid values.
SystemConfig system_config_from_json(const nlohmann::json& j);

struct TrainedSystem {
  pipeline::Models models;
  std::vector<adapter::EpochLog> adapter_log;
  flow::StageLog flow_log;
};

// Teacher targets, or per-emotion constant targets for the no-teacher variant.
std::vector<corpus::ProsodyTarget> targets_for(const corpus::Corpus& corpus, Ablation a);

// Trains timbre encoder, codebook, adapter and flow for the variant. Only the
// adapter configuration and the targets depend on the variant.
TrainedSystem train_system(const corpus::Corpus& corpus, const SystemConfig& cfg,
                           std::uint64_t seed, Ablation a = Ablation::kFull);

struct Evaluation {
  metrics::MetricReport seen;
  metrics::MetricReport unseen;
  metrics::MetricReport all;  // the whole test split, seen and unseen together
  std::vector<pipeline::SynthesisTrace> traces;  // seen then unseen
  std::vector<std::size_t> utterances;           // corpus index per trace
};

// Synthesises every evaluation utterance and scores it with the frozen
// encoders. The reference-mode and persona-shuffle variants act here.
Evaluation evaluate(const corpus::Corpus& corpus, const TrainedSystem& system,
                    const metrics::EvalEncoders& encoders, const SystemConfig& cfg,
                    std::uint64_t seed, Ablation a = Ablation::kFull);

// Scores generated contours against the ground-truth contours of the same
// utterances. EER trials: every same-character (generated, reference) pair is
// genuine; an equal-size seeded sample of cross-character pairs is impostor.
metrics::MetricReport score(const std::string& label, const corpus::Corpus& corpus,
                            const std::vector<std::size_t>& utterances,
                            const std::vector<corpus::Contour>& generated,
                            const metrics::EvalEncoders& encoders, std::uint64_t seed);

// Cosines between generated contours of one character with different
// emotions, and between generated contours of different characters.
struct IdentityCheck {
  std::vector<double> same_character_cross_emotion;
  std::vector<double> cross_character;
  double cross_p95 = 0.0;
  double share_above = 0.0;  // share of same-character pairs above cross_p95
  double median_same = 0.0;
};

IdentityCheck identity_check(const corpus::Corpus& corpus, const Evaluation& ev,
                             const metrics::SpeakerEncoder& encoder);

struct AblationRow {
  Ablation variant;
  metrics::MetricReport seen;
  metrics::MetricReport unseen;
  metrics::MetricReport all;
};

// Rows with deltas against the first row (the full model).
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Text queries are one per unseen character; the gallery holds the test clips
// of the unseen characters.
std::vector<retrieval::SharedEmbedding> retrieval_queries(const corpus::Corpus& corpus,
                                                          const pipeline::Models& models,
                                                          const retrieval::Projection& projection);
retrieval::RetrievalIndex retrieval_gallery(const corpus::Corpus& corpus, const pipeline::Models& models,
                                            const retrieval::Projection& projection);

// 50 characters, 20 of them unseen, 40 clips each.
corpus::CorpusParams retrieval_corpus_params();

struct RetrievalStudyConfig {
  corpus::CorpusParams corpus = retrieval_corpus_params();
  int adapter_epochs = 4;  // only the description encoding is used
  retrieval::ProjectionConfig projection;
  std::size_t untrained_inits = 10;
};

struct RetrievalStudy {
  double random_baseline = 0.0;  // 1 / unseen characters
  retrieval::RetrievalScores trained;
  std::vector<retrieval::RetrievalScores> untrained;  // one per random init
  double untrained_map = 0.0;                         // mean over the inits
  retrieval::AlignmentMatrix alignment;
  std::vector<double> epoch_loss;
};

// Trains the timbre track, an adapter and the projection on the seen
// characters of a dedicated corpus and scores text-to-audio retrieval on its
// unseen characters, next to randomly initialised projections.
RetrievalStudy run_retrieval_study(const RetrievalStudyConfig& cfg, std::uint64_t seed);

std::map<std::string, std::string> encoder_checksums(const metrics::EvalEncoders& e);

}  // namespace duotrack::experiment
