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

#include "duotrack/adapter/adapter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "duotrack/core/errors.hpp"
#include "duotrack/core/hash.hpp"
#include "duotrack/core/rng.hpp"
#include "duotrack/corpus/vocab.hpp"
#include "duotrack/numkernel/layers.hpp"
#include "duotrack/numkernel/ops.hpp"

namespace duotrack::adapter {

using nlohmann::json;
using nk::Bound;
using nk::Tape;
using nk::Tensor;
using nk::Var;

namespace {

constexpr std::size_t kVolatilityBuckets = 4;

Tensor sinusoidal_positions(std::size_t n, std::size_t dim) {
  Tensor t = Tensor::zeros({n, dim});
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      t(pos, i) = std::sin(static_cast<double>(pos) * freq);
      if (i + 1 < dim) t(pos, i + 1) = std::cos(static_cast<double>(pos) * freq);
    }
  }
  return t;
}

Tensor row_tensor(std::span<const double> v) {
  return Tensor::matrix(1, v.size(), {v.begin(), v.end()});
}

std::vector<double> values_of(Var v) { return {v.value().data().begin(), v.value().data().end()}; }

}  // namespace

void AdapterConfig::check() const {
  if (num_layers == 0) throw ConfigError("adapter needs at least one layer");
  if (hidden_dim == 0 || num_heads == 0 || hidden_dim % num_heads != 0)
    throw ConfigError("hidden_dim must be a positive multiple of num_heads");
  if (prosody_dim != corpus::kProsodyDim) throw ConfigError("prosody_dim must be 5");
  if (rationale_dim == 0 || z_dim == 0 || desc_buckets == 0)
    throw ConfigError("rationale_dim, z_dim and desc_buckets must be positive");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (lambda_sem < 0.0 || lambda_con < 0.0) throw ConfigError("loss weights must be non-negative");
  if (epochs < 0 || batch == 0) throw ConfigError("epochs must be >= 0 and batch > 0");
  if (!(lr > 0.0) || lr_floor < 0.0 || weight_decay < 0.0)
    throw ConfigError("learning rates and weight decay must be non-negative");
}

AdapterConfig reference_scale_config() {
  AdapterConfig c;
  c.num_layers = 4;
  c.hidden_dim = 512;
  c.num_heads = 8;
  c.lr = 1e-4;
  c.lr_floor = 1e-6;
  c.epochs = 100;
  return c;
}

json to_json(const AdapterConfig& c) {
  return json{{"num_layers", c.num_layers},       {"hidden_dim", c.hidden_dim},
              {"num_heads", c.num_heads},         {"rationale_dim", c.rationale_dim},
              {"prosody_dim", c.prosody_dim},     {"z_dim", c.z_dim},
              {"desc_buckets", c.desc_buckets},   {"lambda_sem", c.lambda_sem},
              {"lambda_con", c.lambda_con},       {"tau", c.tau},
              {"epochs", c.epochs},               {"lr", c.lr},
              {"lr_floor", c.lr_floor},           {"batch", c.batch},
              {"weight_decay", c.weight_decay},   {"squared_norms", c.squared_norms}};
}

AdapterConfig adapter_config_from_json(const json& j) {
  AdapterConfig c;
  try {
    c.num_layers = j.value("num_layers", c.num_layers);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.num_heads = j.value("num_heads", c.num_heads);
    c.rationale_dim = j.value("rationale_dim", c.rationale_dim);
    c.prosody_dim = j.value("prosody_dim", c.prosody_dim);
    c.z_dim = j.value("z_dim", c.z_dim);
    c.desc_buckets = j.value("desc_buckets", c.desc_buckets);
    c.lambda_sem = j.value("lambda_sem", c.lambda_sem);
    c.lambda_con = j.value("lambda_con", c.lambda_con);
    c.tau = j.value("tau", c.tau);
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.lr_floor = j.value("lr_floor", c.lr_floor);
    c.batch = j.value("batch", c.batch);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.squared_norms = j.value("squared_norms", c.squared_norms);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("adapter config: ") + e.what());
  }
  c.check();
  return c;
}

ControlParams control_from_phat(const std::array<double, corpus::kProsodyDim>& p_hat) {
  const double v = p_hat[0];
  const double a = p_hat[1];
  ControlParams c;
  c.delta_f0 = p_hat[3];
  c.delta_e = p_hat[4];
  c.duration_scale = std::clamp(1.0 / (0.6 + 0.8 * a), 0.5, 2.0);
  c.pause_scale = std::clamp(1.0 - a + 0.5 * (1.0 - v), 0.0, 2.0);
  return c;
}

std::vector<std::size_t> description_buckets(const std::string& description,
                                             std::size_t buckets) {
  std::vector<std::size_t> ids;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) ids.push_back(static_cast<std::size_t>(fnv1a(word) % buckets));
    word.clear();
  };
  for (unsigned char ch : description) {
    if (std::isalnum(ch) != 0) {
      word.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
    }
  }
  flush();
  if (ids.empty()) throw DomainError("persona description has no words");
  return ids;
}

std::size_t volatility_bucket(double volatility) {
  const double v = std::clamp(volatility, 0.0, 1.0);
  return std::min(kVolatilityBuckets - 1,
                  static_cast<std::size_t>(v * static_cast<double>(kVolatilityBuckets)));
}

Adapter::Adapter(const AdapterConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.check();
  Rng rng(seed);
  const std::size_t h = cfg_.hidden_dim;
  params_.add("tok.emb", nk::xavier_uniform(corpus::vocab::kVocabSize, h, rng));
  params_.add("sem.archetype", nk::xavier_uniform(corpus::kNumArchetypes, h, rng));
  params_.add("sem.speech", nk::xavier_uniform(corpus::kNumSpeechPatterns, h, rng));
  params_.add("sem.volatility", nk::xavier_uniform(kVolatilityBuckets, h, rng));
  params_.add("sem.volatility_scale", nk::xavier_uniform(1, h, rng));
  params_.add("sem.emotion", nk::xavier_uniform(corpus::vocab::kNumHints, h, rng));
  params_.add("sem.desc", nk::xavier_uniform(cfg_.desc_buckets, h, rng));
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    const std::string pre = "layer" + std::to_string(l);
    for (const char* part : {".ln_self", ".ln_cross", ".ln_sem", ".ln_ffn"})
      nk::add_layernorm(params_, pre + part, h);
    for (const char* attn : {".self", ".cross"})
      for (const char* proj : {".q", ".k", ".v", ".o"})
        nk::add_linear(params_, pre + attn + proj, h, h, rng);
    nk::add_mlp(params_, pre + ".ffn", {h, 2 * h, h}, rng);
  }
  nk::add_layernorm(params_, "final_ln", h);
  nk::add_mlp(params_, "head.pitch", {h, h, 1}, rng);
  nk::add_mlp(params_, "head.energy", {h, h, 1}, rng);
  nk::add_mlp(params_, "head.duration", {h, h, 1}, rng);
  nk::add_mlp(params_, "head.pause", {h, h, 2}, rng);
  nk::add_linear(params_, "head.semantic", h, cfg_.rationale_dim, rng);
  nk::add_linear(params_, "head.z", h, cfg_.z_dim, rng);
}

Var Adapter::semantic_tokens(const Bound& p, const corpus::PersonaConfig& persona,
                             std::span<const int> tokens) const {
  const std::size_t arch[] = {corpus::index_of(persona.archetype)};
  const std::size_t speech[] = {corpus::index_of(persona.speech_pattern)};
  const std::size_t vol[] = {volatility_bucket(persona.volatility)};
  const std::size_t hint[] = {corpus::vocab::emotion_hint(tokens)};
  const auto words = description_buckets(persona.description, cfg_.desc_buckets);
  const Var rows[] = {
      nk::gather_rows(p["sem.archetype"], arch),
      nk::gather_rows(p["sem.speech"], speech),
      nk::add(nk::gather_rows(p["sem.volatility"], vol),
              nk::scale(p["sem.volatility_scale"], persona.volatility)),
      nk::gather_rows(p["sem.emotion"], hint),
      nk::gather_rows(p["sem.desc"], words),
  };
  return nk::concat_rows(rows);
}

Var Adapter::attention(const Bound& p, const std::string& name, Var q_in, Var kv_in) const {
  const Var q = nk::linear(p, name + ".q", q_in);
  const Var k = nk::linear(p, name + ".k", kv_in);
  const Var v = nk::linear(p, name + ".v", kv_in);
  const std::size_t d = cfg_.hidden_dim / cfg_.num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Var> heads;
  heads.reserve(cfg_.num_heads);
  for (std::size_t hd = 0; hd < cfg_.num_heads; ++hd) {
    const Var qh = nk::slice_cols(q, hd * d, (hd + 1) * d);
    const Var kh = nk::slice_cols(k, hd * d, (hd + 1) * d);
    const Var vh = nk::slice_cols(v, hd * d, (hd + 1) * d);
    const Var w = nk::softmax_rows(nk::scale(nk::matmul(qh, nk::transpose(kh)), inv_sqrt));
    heads.push_back(nk::matmul(w, vh));
  }
  return nk::linear(p, name + ".o", nk::concat_cols(heads));
}

ForwardVars Adapter::forward(const Bound& p, const corpus::PersonaConfig& persona,
                             std::span<const int> tokens) const {
  corpus::vocab::check_tokens(tokens);
  std::vector<std::size_t> ids;
  for (int t : tokens)
    if (t != corpus::vocab::kPad) ids.push_back(static_cast<std::size_t>(t));
  if (ids.empty()) throw DomainError("utterance contains only padding");

  const Var sem = semantic_tokens(p, persona, tokens);
  Var x = nk::add_const(nk::gather_rows(p["tok.emb"], ids),
                        sinusoidal_positions(ids.size(), cfg_.hidden_dim));
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    const std::string pre = "layer" + std::to_string(l);
    const Var xs = nk::layer_norm(p, pre + ".ln_self", x);
    x = nk::add(x, attention(p, pre + ".self", xs, xs));
    const Var xc = nk::layer_norm(p, pre + ".ln_cross", x);
    x = nk::add(x, attention(p, pre + ".cross", xc, nk::layer_norm(p, pre + ".ln_sem", sem)));
    x = nk::add(x, nk::mlp(p, pre + ".ffn", nk::layer_norm(p, pre + ".ln_ffn", x), 2));
  }
  const Var pooled = nk::mean_rows(nk::layer_norm(p, "final_ln", x));

  const Var pitch = nk::tanh(nk::mlp(p, "head.pitch", pooled, 2));
  const Var energy = nk::tanh(nk::mlp(p, "head.energy", pooled, 2));
  const Var arousal = nk::sigmoid(nk::mlp(p, "head.duration", pooled, 2));
  const Var pause = nk::sigmoid(nk::mlp(p, "head.pause", pooled, 2));
  const Var parts[] = {nk::slice_cols(pause, 0, 1), arousal, nk::slice_cols(pause, 1, 2), pitch,
                       energy};
  return {nk::concat_cols(parts), nk::linear(p, "head.semantic", pooled),
          nk::linear(p, "head.z", pooled)};
}

AdapterOutput Adapter::run(const corpus::PersonaConfig& persona,
                           std::span<const int> tokens) const {
  Tape tape;
  Bound p(tape, params_, false);
  const ForwardVars f = forward(p, persona, tokens);
  AdapterOutput out;
  const auto& ph = f.p_hat.value().data();
  for (std::size_t i = 0; i < corpus::kProsodyDim; ++i) {
    const double lo = i < 3 ? 0.0 : -1.0;
    out.p_hat[i] = std::clamp(ph[i], lo, 1.0);
  }
  out.h_adapter = values_of(f.h);
  out.z = values_of(f.z);
  out.control = control_from_phat(out.p_hat);
  return out;
}

std::vector<double> Adapter::encode_description(const std::string& description) const {
  const auto ids = description_buckets(description, cfg_.desc_buckets);
  const Tensor& table = params_.get("sem.desc");
  std::vector<double> out(cfg_.hidden_dim, 0.0);
  for (std::size_t id : ids) {
    auto row = table.row(id);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += row[c];
  }
  for (double& v : out) v /= static_cast<double>(ids.size());
  return out;
}

nk::Checkpoint Adapter::to_checkpoint() const {
  nk::Checkpoint ck;
  ck.meta = json{{"kind", "adapter"}, {"config", to_json(cfg_)}}.dump();
  for (const auto& e : params_.entries()) ck.put(e.name, e.value);
  return ck;
}

Adapter Adapter::from_checkpoint(const nk::Checkpoint& ck) {
  json meta;
  try {
    meta = json::parse(ck.meta);
  } catch (const json::exception&) {
    throw DataError("checkpoint metadata is not JSON");
  }
  if (meta.value("kind", "") != "adapter")
    throw DataError("checkpoint holds '" + meta.value("kind", "") + "', expected 'adapter'");
  Adapter a(adapter_config_from_json(meta.at("config")), 0);
  for (auto& e : a.params_.entries()) {
    const Tensor& t = ck.get(e.name);
    if (!t.same_shape(e.value)) throw DataError("checkpoint tensor " + e.name + " has wrong shape");
    e.value = t;
  }
  return a;
}

namespace {

Var row_distances(Var a, Var b, bool squared) {
  if (!a.value().same_shape(b.value())) throw ShapeError("distance operands differ in shape");
  const Var diff = nk::sub(a, b);
  const std::size_t n = diff.value().rows();
  Var total;
  for (std::size_t r = 0; r < n; ++r) {
    const Var row = nk::slice_rows(diff, r, r + 1);
    const Var d = squared ? nk::sum(nk::square(row)) : nk::l2_norm(row);
    total = r == 0 ? d : nk::add(total, d);
  }
  return nk::scale(total, 1.0 / static_cast<double>(n));
}

void require_nonzero(const Tensor& t, const char* what) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double n2 = 0.0;
    for (double v : t.row(r)) n2 += v * v;
    if (!(n2 > 0.0)) throw DomainError(std::string(what) + " has zero norm");
  }
}

}  // namespace

Var semantic_distance(Var h, Var h_target, bool squared) {
  return row_distances(h, h_target, squared);
}

Var distill_loss(Var p_hat, Var p_target, Var h, Var h_target, double lambda_sem, bool squared) {
  if (p_hat.value().rows() != h.value().rows())
    throw ShapeError("distill_loss: prosody and semantic batches differ");
  const Var prosody = row_distances(p_hat, p_target, squared);
  return nk::add(prosody, nk::scale(row_distances(h, h_target, squared), lambda_sem));
}

Var contrastive_loss(Var z_i, Var z_p, Var negatives, double tau) {
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  if (negatives.value().rows() == 0) throw DomainError("contrastive loss needs a negative");
  if (z_i.value().rows() != 1 || z_p.value().rows() != 1)
    throw ShapeError("contrastive_loss: z_i and z_p must be single rows");
  require_nonzero(z_i.value(), "z_i");
  require_nonzero(z_p.value(), "z_p");
  require_nonzero(negatives.value(), "negative");
  const Var candidates[] = {z_p, negatives};
  const Var keys = nk::normalize_rows(nk::concat_rows(candidates));
  const Var sims = nk::matmul(nk::normalize_rows(z_i), nk::transpose(keys));
  const std::size_t label[] = {0};
  return nk::cross_entropy_mean(nk::scale(sims, 1.0 / tau), label);
}

double distill_loss_value(std::span<const double> p_hat, std::span<const double> p_target,
                          std::span<const double> h, std::span<const double> h_target,
                          double lambda_sem, bool squared) {
  Tape tape;
  const Var loss = distill_loss(tape.constant(row_tensor(p_hat)), tape.constant(row_tensor(p_target)),
                                tape.constant(row_tensor(h)), tape.constant(row_tensor(h_target)),
                                lambda_sem, squared);
  return loss.value().item();
}

double contrastive_loss_value(std::span<const double> z_i, std::span<const double> z_p,
                              const std::vector<std::vector<double>>& negatives, double tau) {
  if (negatives.empty()) throw DomainError("contrastive loss needs a negative");
  Tape tape;
  const Var loss = contrastive_loss(tape.constant(row_tensor(z_i)), tape.constant(row_tensor(z_p)),
                                    tape.constant(nk::rows_of(negatives)), tau);
  return loss.value().item();
}

}  // namespace duotrack::adapter
