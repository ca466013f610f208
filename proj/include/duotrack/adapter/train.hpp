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
#include <map>
#include <string>
#include <vector>

#include "duotrack/adapter/adapter.hpp"
#include "duotrack/corpus/generate.hpp"

namespace duotrack::adapter {

// Epoch 0 holds the metrics of the untrained model; later rows are means over
// the minibatches of that epoch, with val_mse measured after it.
struct EpochLog {
  int epoch = 0;
  double distill = 0.0;
  double semantic = 0.0;
  double contrast = 0.0;
  double total = 0.0;
  double val_mse = 0.0;
};

struct TrainOptions {
  // Training state is written here after every epoch when non-empty.
  std::string state_path;
  // Continue from `state_path` instead of starting fresh.
  bool resume = false;
  // Stop once this epoch has finished (for interrupted runs); -1 runs all.
  int stop_after_epoch = -1;
};

using AnchorMap = std::map<std::string, std::vector<double>>;

struct BatchExample {
  const corpus::PersonaConfig* persona;
  const corpus::Utterance* utterance;
  const corpus::ProsodyTarget* target;
};

struct BatchLoss {
  nk::Var total;  // distill + lambda_con * contrast
  double distill = 0.0;
  double semantic = 0.0;
  double contrast = 0.0;
  std::vector<std::vector<double>> z;
};

// Training objective on one minibatch. Each example is contrasted against the
// anchor of its character and the in-batch examples of other characters;
// examples without such negatives are left out of the contrastive mean.
BatchLoss batch_loss(nk::Tape& tape, const nk::Bound& p, const Adapter& model,
                     const std::vector<BatchExample>& batch, const AnchorMap& anchors);

struct TrainedAdapter {
  Adapter model;
  std::vector<EpochLog> log;
  AnchorMap anchors;
};

// Trains on the train split and validates on the val split. Every
// train-split utterance must belong to a seen character, otherwise
// LeakageError. `targets` overrides the corpus teacher targets (one per
// utterance), which is how the constant-target ablation is run.
TrainedAdapter train_adapter(const corpus::Corpus& corpus, const AdapterConfig& cfg,
                             std::uint64_t seed, const TrainOptions& options = {},
                             const std::vector<corpus::ProsodyTarget>* targets = nullptr);

// Throws LeakageError when a train- or val-split utterance or its persona is
// marked unseen.
void check_training_split(const corpus::Corpus& corpus);

// Mean over utterances of the mean squared error across the five prosody values.
double prosody_mse(const Adapter& model, const corpus::Corpus& corpus,
                   const std::vector<std::size_t>& indices,
                   const std::vector<corpus::ProsodyTarget>& targets);

std::string training_log_csv(const std::vector<EpochLog>& log);

}  // namespace duotrack::adapter
