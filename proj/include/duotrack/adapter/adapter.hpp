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
#include <span>
#include <string>
#include <vector>

#include "duotrack/corpus/types.hpp"
#include "duotrack/numkernel/params.hpp"
#include "json.hpp"

namespace duotrack::adapter {

struct AdapterConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_dim = 64;
  std::size_t num_heads = 4;
  std::size_t rationale_dim = corpus::kRationaleDim;
  std::size_t prosody_dim = corpus::kProsodyDim;
  std::size_t z_dim = 256;
  std::size_t desc_buckets = 256;
  double lambda_sem = 0.5;
  double lambda_con = 0.3;
  double tau = 0.07;
  int epochs = 20;
  double lr = 2e-3;
  double lr_floor = 1e-4;
  std::size_t batch = 32;
  double weight_decay = 0.01;
  // Squared distances in the distillation loss instead of Euclidean norms.
  bool squared_norms = false;

  // Throws ConfigError on inconsistent values.
  void check() const;
};

// Layer count, width and schedule of the large reference configuration.
AdapterConfig reference_scale_config();

nlohmann::json to_json(const AdapterConfig& c);
AdapterConfig adapter_config_from_json(const nlohmann::json& j);

struct ControlParams {
  double delta_f0 = 0.0;
  double delta_e = 0.0;
  double duration_scale = 1.0;
  double pause_scale = 1.0;
};

ControlParams control_from_phat(const std::array<double, corpus::kProsodyDim>& p_hat);

struct AdapterOutput {
  std::array<double, corpus::kProsodyDim> p_hat{};  // V, A, D, f0_rel, e_rel
  std::vector<double> h_adapter;
  std::vector<double> z;
  ControlParams control;
};

// Graph handles for one forward pass. p_hat is 1x5, h 1xrationale_dim, z 1xz_dim.
struct ForwardVars {
  nk::Var p_hat;
  nk::Var h;
  nk::Var z;
};

// Lower-cased alphanumeric words of a persona description, hashed into
// `buckets` ids. Throws DomainError when no word is present.
std::vector<std::size_t> description_buckets(const std::string& description, std::size_t buckets);

std::size_t volatility_bucket(double volatility);

class Adapter {
 public:
  Adapter() = default;
  Adapter(const AdapterConfig& cfg, std::uint64_t seed);

  const AdapterConfig& config() const { return cfg_; }
  nk::ParamStore& params() { return params_; }
  const nk::ParamStore& params() const { return params_; }

  // Padding tokens are dropped before positions are assigned, so their
  // placement never changes the result. Throws DomainError for tokens outside
  // the vocabulary or an utterance made only of padding.
  ForwardVars forward(const nk::Bound& p, const corpus::PersonaConfig& persona,
                      std::span<const int> tokens) const;
  AdapterOutput run(const corpus::PersonaConfig& persona, std::span<const int> tokens) const;

  // Mean embedding of the hashed description words, hidden_dim wide.
  std::vector<double> encode_description(const std::string& description) const;

  nk::Checkpoint to_checkpoint() const;
  static Adapter from_checkpoint(const nk::Checkpoint& ck);

 private:
  nk::Var semantic_tokens(const nk::Bound& p, const corpus::PersonaConfig& persona,
                          std::span<const int> tokens) const;
  nk::Var attention(const nk::Bound& p, const std::string& name, nk::Var q_in,
                    nk::Var kv_in) const;

  AdapterConfig cfg_;
  nk::ParamStore params_;
};

// Euclidean (or squared, when `squared`) distances averaged over the rows of
// the batch: mean_i ||p_hat_i - p_i|| + lambda_sem * ||h_i - h_R_i||.
nk::Var distill_loss(nk::Var p_hat, nk::Var p_target, nk::Var h, nk::Var h_target,
                     double lambda_sem, bool squared = false);
// Unweighted semantic part of the loss above.
nk::Var semantic_distance(nk::Var h, nk::Var h_target, bool squared = false);

// InfoNCE over cosine similarities. `z_i` and `z_p` are 1xd, `negatives` kxd
// with k >= 1. The positive is part of the denominator. Throws DomainError for
// zero-norm inputs.
nk::Var contrastive_loss(nk::Var z_i, nk::Var z_p, nk::Var negatives, double tau);

double distill_loss_value(std::span<const double> p_hat, std::span<const double> p_target,
                          std::span<const double> h, std::span<const double> h_target,
                          double lambda_sem, bool squared = false);
double contrastive_loss_value(std::span<const double> z_i, std::span<const double> z_p,
                              const std::vector<std::vector<double>>& negatives, double tau);

}  // namespace duotrack::adapter
