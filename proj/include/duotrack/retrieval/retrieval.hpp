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
#include <vector>

#include "duotrack/adapter/adapter.hpp"
#include "duotrack/corpus/generate.hpp"
#include "duotrack/metrics/features.hpp"
#include "duotrack/numkernel/params.hpp"
#include "duotrack/timbre/codebook.hpp"
#include "duotrack/timbre/encoder.hpp"
#include "json.hpp"

// Text-to-audio persona retrieval in a shared embedding space.
namespace duotrack::retrieval {

inline constexpr std::size_t kSharedDim = 256;

enum class Modality { kText, kAudio };
std::string to_string(Modality m);

struct SharedEmbedding {
  std::vector<double> vector;  // unit norm
  Modality modality = Modality::kText;
  std::string character_id;
};

struct ProjectionConfig {
  std::size_t text_hidden = 128;
  std::size_t audio_hidden = 256;
  std::size_t fine_grid = 32;
  double tau = 0.07;
  int epochs = 60;  // 0 leaves the heads at their random init
  int steps_per_epoch = 10;
  std::size_t batch = 16;  // distinct characters per batch
  double word_dropout = 0.2;  // per-word drop rate on training descriptions
  double lr = 2e-3;
  double lr_floor = 1e-4;
  double weight_decay = 1e-4;

  void check() const;
};

nlohmann::json to_json(const ProjectionConfig& c);
ProjectionConfig projection_config_from_json(const nlohmann::json& j);

// Adapter encoding of the description words. Throws DomainError for a blank
// description.
std::vector<double> text_features(const adapter::Adapter& adapter, const std::string& description);

// Quantized timbre vector, the fine prosody curve in units of the decoded f0
// range, and the contour statistics. Throws DomainError for a malformed contour.
std::vector<double> audio_features(const corpus::Contour& contour, const timbre::TimbreEncoder& timbre,
                                   const timbre::SQCodebook& codebook, std::size_t fine_grid);

// Two MLP heads, one per modality, ending in a unit-norm kSharedDim vector.
// Inputs are standardised with scalers fitted on the training features.
class Projection {
 public:
  Projection() = default;
  Projection(metrics::FeatureScaler text_scaler, metrics::FeatureScaler audio_scaler,
             const ProjectionConfig& cfg, std::uint64_t seed);

  // Rows of standardised features in, rows of unit vectors out.
  nk::Var text_head(const nk::Bound& p, nk::Var x) const;
  nk::Var audio_head(const nk::Bound& p, nk::Var x) const;

  std::vector<double> embed_text(const std::vector<double>& features) const;
  std::vector<double> embed_audio(const std::vector<double>& features) const;

  const metrics::FeatureScaler& text_scaler() const { return text_scaler_; }
  const metrics::FeatureScaler& audio_scaler() const { return audio_scaler_; }
  const ProjectionConfig& config() const { return cfg_; }
  nk::ParamStore& params() { return params_; }
  const nk::ParamStore& params() const { return params_; }

  nk::Checkpoint to_checkpoint() const;
  static Projection from_checkpoint(const nk::Checkpoint& ck);

 private:
  std::vector<double> embed(const std::string& head, const metrics::FeatureScaler& s,
                            const std::vector<double>& features) const;

  ProjectionConfig cfg_;
  metrics::FeatureScaler text_scaler_;
  metrics::FeatureScaler audio_scaler_;
  nk::ParamStore params_;
};

SharedEmbedding embed_text_query(const std::string& description, const std::string& character_id,
                                 const adapter::Adapter& adapter, const Projection& projection);
SharedEmbedding embed_audio_item(const corpus::Contour& contour, const std::string& character_id,
                                 const timbre::TimbreEncoder& timbre,
                                 const timbre::SQCodebook& codebook, const Projection& projection);

// Symmetric InfoNCE over a batch of paired rows; row i of each side belongs
// to the same character.
nk::Var symmetric_info_nce(nk::Var text, nk::Var audio, double tau);
double symmetric_info_nce_value(const std::vector<std::vector<double>>& text,
                                const std::vector<std::vector<double>>& audio, double tau);

struct TrainedProjection {
  Projection projection;
  std::vector<double> epoch_loss;
};

// Trains on the train-split clips and descriptions of the corpus. Any
// utterance or persona marked unseen that reaches a batch is a LeakageError.
TrainedProjection train_projection(const corpus::Corpus& corpus, const adapter::Adapter& adapter,
                                   const timbre::TimbreEncoder& timbre,
                                   const timbre::SQCodebook& codebook, const ProjectionConfig& cfg,
                                   std::uint64_t seed);

struct GalleryItem {
  std::string clip_id;
  SharedEmbedding embedding;
};

struct Hit {
  std::string clip_id;
  std::string character_id;
  double score = 0.0;
};

// Immutable after construction; queries are read-only.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  // Throws ContractError for text items, wrong widths or non-unit vectors.
  explicit RetrievalIndex(std::vector<GalleryItem> items);

  const std::vector<GalleryItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  // Exact top-k by dot product, ties broken by clip_id. k beyond the gallery
  // size returns the full ranking.
  std::vector<Hit> search(const SharedEmbedding& query, std::size_t k) const;

  // Writes `<path>.bin` (vectors) and `<path>.json` (clip metadata).
  void save(const std::string& path) const;
  static RetrievalIndex load(const std::string& path);

 private:
  std::vector<GalleryItem> items_;
};

struct RetrievalScores {
  std::size_t queries = 0;
  double map = 0.0;
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  double mrr = 0.0;
};

// One relevance flag per ranked gallery item for each query, over the full
// ranking. A query without any relevant item is a ContractError.
RetrievalScores score_rankings(const std::vector<std::vector<bool>>& relevance);

// Relevance is a shared character_id.
RetrievalScores retrieval_metrics(const std::vector<SharedEmbedding>& queries,
                                  const RetrievalIndex& index);

nlohmann::json to_json(const RetrievalScores& s);

// Mean cosine between each character's text query and the gallery clips of
// each character, rows and columns in `characters` order.
struct AlignmentMatrix {
  std::vector<std::string> characters;
  std::vector<std::vector<double>> values;

  double diagonal_mean() const;
  double off_diagonal_mean() const;
};

AlignmentMatrix alignment_matrix(const std::vector<SharedEmbedding>& queries,
                                 const RetrievalIndex& index);
std::string alignment_csv(const AlignmentMatrix& m);
// modality, character_id, clip_id, then the vector coordinates.
std::string embeddings_csv(const std::vector<SharedEmbedding>& queries, const RetrievalIndex& index);

}  // namespace duotrack::retrieval
