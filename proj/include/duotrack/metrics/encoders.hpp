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
#include <span>
#include <string>
#include <vector>

#include "duotrack/corpus/generate.hpp"
#include "duotrack/metrics/features.hpp"
#include "duotrack/numkernel/params.hpp"

namespace duotrack::metrics {

enum class HeadKind { kEmbedding, kClassifier };

struct ContourNetConfig {
  HeadKind kind = HeadKind::kEmbedding;
  std::size_t hidden = 64;
  std::size_t out_dim = 192;    // embedding size, or number of logits
  std::size_t num_classes = 2;  // training classes for the embedding head
  double logit_scale = 10.0;    // cosine-classifier temperature
  std::size_t readout_dim = 0;  // optional linear readout from the embedding
  double readout_weight = 1.0;
  int epochs = 40;
  std::size_t batch = 64;
  double lr = 3e-3;
  double weight_decay = 1e-4;
};

// MLP over standardised contour features. The embedding variant trains with a
// cosine classifier over `num_classes` prototypes that is discarded after
// training; the classifier variant emits logits directly.
class ContourNet {
 public:
  ContourNet() = default;
  ContourNet(const ContourNetConfig& cfg, std::uint64_t seed);

  // Body output for a standardised feature matrix (rows = items).
  nk::Var forward(const nk::Bound& p, nk::Var x) const;
  // Training loss on standardised features. `readout` holds one target row
  // per item when the readout is enabled.
  nk::Var loss(const nk::Bound& p, nk::Var x, std::span<const std::size_t> labels,
               const nk::Tensor* readout) const;

  // Raw body outputs for raw (unstandardised) feature rows.
  std::vector<std::vector<double>> outputs(const std::vector<std::vector<double>>& features) const;
  std::vector<double> readout(std::span<const double> unit_embedding) const;

  nk::Tensor standardise(const std::vector<std::vector<double>>& features) const;

  nk::Checkpoint to_checkpoint(const std::string& kind) const;
  static ContourNet from_checkpoint(const nk::Checkpoint& ck, const std::string& kind);

  ContourNetConfig cfg;
  FeatureScaler scaler;
  nk::ParamStore params;
};

struct TrainStats {
  std::vector<double> epoch_loss;
};

// Fits the scaler on `features` and trains with AdamW + cosine schedule.
TrainStats train_contour_net(ContourNet& net, const std::vector<std::vector<double>>& features,
                             const std::vector<std::size_t>& labels,
                             const std::vector<std::vector<double>>* readout_targets,
                             std::uint64_t seed);

class SpeakerEncoder {
 public:
  SpeakerEncoder() = default;
  explicit SpeakerEncoder(ContourNet net) : net_(std::move(net)) {}
  std::vector<double> embed(const corpus::Contour& c) const;
  std::vector<std::vector<double>> embed_all(std::span<const corpus::Contour> cs) const;
  const ContourNet& net() const { return net_; }
  ContourNet& net() { return net_; }

 private:
  ContourNet net_;
};

class EmotionClassifier {
 public:
  EmotionClassifier() = default;
  explicit EmotionClassifier(ContourNet net) : net_(std::move(net)) {}
  std::vector<double> logits(const corpus::Contour& c) const;
  std::vector<std::size_t> predict_all(std::span<const corpus::Contour> cs) const;
  const ContourNet& net() const { return net_; }
  ContourNet& net() { return net_; }

 private:
  ContourNet net_;
};

struct EvalEncoderConfig {
  ContourNetConfig speaker{HeadKind::kEmbedding, 64, 192, 2, 10.0, 0, 1.0, 40, 64, 3e-3, 1e-4};
  ContourNetConfig emotion{HeadKind::kClassifier, 64, corpus::kNumEmotions, 2, 10.0, 0, 1.0, 40, 64, 3e-3, 1e-4};
};

struct EvalEncoders {
  SpeakerEncoder speaker;
  EmotionClassifier emotion;
  double speaker_cosine_gap = 0.0;  // same minus different character, held-out split
  double emotion_accuracy = 0.0;    // held-out split
};

// Throws LeakageError if any encoder-corpus character also appears in
// `eval_corpus`.
void check_disjoint(const corpus::Corpus& encoder_corpus, const corpus::Corpus& eval_corpus);

EvalEncoders train_eval_encoders(const corpus::Corpus& encoder_corpus,
                                 const corpus::Corpus& eval_corpus, std::uint64_t seed,
                                 const EvalEncoderConfig& cfg = {});

// Mean same-character cosine minus mean different-character cosine.
double same_minus_different(const std::vector<std::vector<double>>& embs,
                            const std::vector<std::string>& owners);

// FNV-1a of the encoded checkpoint bytes, hex.
std::string checkpoint_checksum(const nk::Checkpoint& ck);

}  // namespace duotrack::metrics
