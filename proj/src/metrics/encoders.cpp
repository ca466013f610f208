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

#include "duotrack/metrics/encoders.hpp"

#include <set>

#include "duotrack/core/errors.hpp"
#include "duotrack/core/hash.hpp"
#include "duotrack/core/rng.hpp"
#include "duotrack/metrics/scores.hpp"
#include "duotrack/numkernel/layers.hpp"
#include "duotrack/numkernel/optim.hpp"
#include "json.hpp"

namespace duotrack::metrics {

using nlohmann::json;
using nk::Bound;
using nk::Tape;
using nk::Tensor;
using nk::Var;

namespace {

Tensor gather(const Tensor& x, std::span<const std::size_t> rows) {
  Tensor out = Tensor::zeros({rows.size(), x.cols()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = x.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

json config_json(const ContourNetConfig& c) {
  return json{{"kind", c.kind == HeadKind::kEmbedding ? "embedding" : "classifier"},
              {"hidden", c.hidden},
              {"out_dim", c.out_dim},
              {"num_classes", c.num_classes},
              {"logit_scale", c.logit_scale},
              {"readout_dim", c.readout_dim},
              {"readout_weight", c.readout_weight},
              {"epochs", c.epochs},
              {"batch", c.batch},
              {"lr", c.lr},
              {"weight_decay", c.weight_decay}};
}

ContourNetConfig config_from_json(const json& j) {
  ContourNetConfig c;
  c.kind = j.at("kind").get<std::string>() == "embedding" ? HeadKind::kEmbedding
                                                           : HeadKind::kClassifier;
  c.hidden = j.at("hidden").get<std::size_t>();
  c.out_dim = j.at("out_dim").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.logit_scale = j.at("logit_scale").get<double>();
  c.readout_dim = j.at("readout_dim").get<std::size_t>();
  c.readout_weight = j.at("readout_weight").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch = j.at("batch").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  return c;
}

}  // namespace

ContourNet::ContourNet(const ContourNetConfig& c, std::uint64_t seed) : cfg(c) {
  Rng rng(seed);
  nk::add_mlp(params, "body", {kFeatureDim, cfg.hidden, cfg.hidden, cfg.out_dim}, rng);
  if (cfg.kind == HeadKind::kEmbedding) {
    params.add("proto", nk::xavier_uniform(cfg.num_classes, cfg.out_dim, rng));
    if (cfg.readout_dim > 0) nk::add_linear(params, "readout", cfg.out_dim, cfg.readout_dim, rng);
  }
  scaler.mean.assign(kFeatureDim, 0.0);
  scaler.stddev.assign(kFeatureDim, 1.0);
}

Var ContourNet::forward(const Bound& p, Var x) const { return nk::mlp(p, "body", x, 3); }

Var ContourNet::loss(const Bound& p, Var x, std::span<const std::size_t> labels,
                     const Tensor* readout_targets) const {
  Var out = forward(p, x);
  if (cfg.kind == HeadKind::kClassifier) return nk::cross_entropy_mean(out, labels);
  Var u = nk::normalize_rows(out);
  Var protos = nk::normalize_rows(p["proto"]);
  Var logits = nk::scale(nk::matmul(u, nk::transpose(protos)), cfg.logit_scale);
  Var loss = nk::cross_entropy_mean(logits, labels);
  if (cfg.readout_dim > 0 && readout_targets != nullptr) {
    Var r = nk::linear(p, "readout", u);
    Var t = x.tape()->constant(*readout_targets);
    const double denom = static_cast<double>(readout_targets->size());
    loss = nk::add(loss, nk::scale(nk::squared_error(r, t), cfg.readout_weight / denom));
  }
  return loss;
}

Tensor ContourNet::standardise(const std::vector<std::vector<double>>& features) const {
  std::vector<std::vector<double>> rows;
  rows.reserve(features.size());
  for (const auto& f : features) rows.push_back(scaler.apply(f));
  return nk::rows_of(rows);
}

std::vector<std::vector<double>> ContourNet::outputs(
    const std::vector<std::vector<double>>& features) const {
  Tape tape;
  Bound p(tape, params, false);
  Var out = forward(p, tape.constant(standardise(features)));
  std::vector<std::vector<double>> rows;
  const Tensor& v = out.value();
  for (std::size_t r = 0; r < v.rows(); ++r) rows.emplace_back(v.row(r).begin(), v.row(r).end());
  return rows;
}

std::vector<double> ContourNet::readout(std::span<const double> unit_embedding) const {
  if (cfg.readout_dim == 0) throw ContractError("network has no readout");
  Tape tape;
  Bound p(tape, params, false);
  Var x = tape.constant(Tensor::matrix(1, unit_embedding.size(),
                                       {unit_embedding.begin(), unit_embedding.end()}));
  const Tensor& r = nk::linear(p, "readout", x).value();
  return {r.data().begin(), r.data().end()};
}

nk::Checkpoint ContourNet::to_checkpoint(const std::string& kind) const {
  nk::Checkpoint ck;
  ck.meta = json{{"kind", kind}, {"config", config_json(cfg)}}.dump();
  for (const auto& e : params.entries()) ck.put(e.name, e.value);
  ck.put("scaler.mean", Tensor::vector(scaler.mean));
  ck.put("scaler.std", Tensor::vector(scaler.stddev));
  return ck;
}

ContourNet ContourNet::from_checkpoint(const nk::Checkpoint& ck, const std::string& kind) {
  json meta;
  try {
    meta = json::parse(ck.meta);
  } catch (const json::exception&) {
    throw DataError("checkpoint metadata is not JSON");
  }
  if (meta.value("kind", "") != kind)
    throw DataError("checkpoint holds '" + meta.value("kind", "") + "', expected '" + kind + "'");
  ContourNet net(config_from_json(meta.at("config")), 0);
  for (auto& e : net.params.entries()) {
    const Tensor& t = ck.get(e.name);
    if (!t.same_shape(e.value)) throw DataError("checkpoint tensor " + e.name + " has wrong shape");
    e.value = t;
  }
  const auto& m = ck.get("scaler.mean");
  const auto& s = ck.get("scaler.std");
  net.scaler.mean.assign(m.data().begin(), m.data().end());
  net.scaler.stddev.assign(s.data().begin(), s.data().end());
  return net;
}

TrainStats train_contour_net(ContourNet& net, const std::vector<std::vector<double>>& features,
                             const std::vector<std::size_t>& labels,
                             const std::vector<std::vector<double>>* readout_targets,
                             std::uint64_t seed) {
  if (features.size() != labels.size() || features.empty())
    throw ContractError("train_contour_net: features and labels must align");
  net.scaler = FeatureScaler::fit(features);
  const Tensor x = net.standardise(features);
  Tensor targets;
  if (readout_targets != nullptr) targets = nk::rows_of(*readout_targets);

  Rng rng(seed);
  nk::AdamW opt(net.params, {0.9, 0.999, 1e-8, net.cfg.weight_decay});
  TrainStats stats;
  for (int epoch = 0; epoch < net.cfg.epochs; ++epoch) {
    const double lr = nk::cosine_lr(net.cfg.lr, 0.05 * net.cfg.lr, epoch, net.cfg.epochs);
    double total = 0.0;
    const auto batches = nk::minibatches(features.size(), net.cfg.batch, rng);
    for (const auto& b : batches) {
      std::vector<std::size_t> lab(b.size());
      for (std::size_t i = 0; i < b.size(); ++i) lab[i] = labels[b[i]];
      Tensor tb;
      if (readout_targets != nullptr) tb = gather(targets, b);
      Tape tape;
      Bound p(tape, net.params);
      Var loss = net.loss(p, tape.constant(gather(x, b)), lab,
                          readout_targets != nullptr ? &tb : nullptr);
      total += loss.value().item();
      opt.step(net.params, p.gradients(tape.backward(loss)), lr);
    }
    stats.epoch_loss.push_back(total / static_cast<double>(batches.size()));
  }
  return stats;
}

std::vector<double> SpeakerEncoder::embed(const corpus::Contour& c) const {
  return embed_all(std::span<const corpus::Contour>(&c, 1))[0];
}

std::vector<std::vector<double>> SpeakerEncoder::embed_all(
    std::span<const corpus::Contour> cs) const {
  std::vector<std::vector<double>> feats;
  for (const auto& c : cs) feats.push_back(contour_features(c));
  auto out = net_.outputs(feats);
  for (auto& e : out) {
    double n2 = 0.0;
    for (double v : e) n2 += v * v;
    if (n2 == 0.0) throw DomainError("speaker embedding collapsed to zero");
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : e) v *= inv;
  }
  return out;
}

std::vector<double> EmotionClassifier::logits(const corpus::Contour& c) const {
  return net_.outputs({contour_features(c)})[0];
}

std::vector<std::size_t> EmotionClassifier::predict_all(
    std::span<const corpus::Contour> cs) const {
  std::vector<std::vector<double>> feats;
  for (const auto& c : cs) feats.push_back(contour_features(c));
  std::vector<std::size_t> out;
  for (const auto& l : net_.outputs(feats)) out.push_back(argmax(l));
  return out;
}

void check_disjoint(const corpus::Corpus& encoder_corpus, const corpus::Corpus& eval_corpus) {
  std::set<std::string> eval_ids;
  for (const auto& p : eval_corpus.personas) eval_ids.insert(p.character_id);
  for (const auto& p : encoder_corpus.personas) {
    if (eval_ids.count(p.character_id))
      throw LeakageError("encoder corpus character '" + p.character_id +
                         "' also appears in the evaluation corpus");
  }
}

double same_minus_different(const std::vector<std::vector<double>>& embs,
                            const std::vector<std::string>& owners) {
  double same = 0.0, diff = 0.0;
  std::size_t ns = 0, nd = 0;
  for (std::size_t i = 0; i < embs.size(); ++i) {
    for (std::size_t j = i + 1; j < embs.size(); ++j) {
      const double c = cosine(embs[i], embs[j]);
      if (owners[i] == owners[j]) {
        same += c;
        ++ns;
      } else {
        diff += c;
        ++nd;
      }
    }
  }
  if (ns == 0 || nd == 0) throw ContractError("need both same- and different-owner pairs");
  return same / static_cast<double>(ns) - diff / static_cast<double>(nd);
}

EvalEncoders train_eval_encoders(const corpus::Corpus& encoder_corpus,
                                 const corpus::Corpus& eval_corpus, std::uint64_t seed,
                                 const EvalEncoderConfig& cfg) {
  check_disjoint(encoder_corpus, eval_corpus);
  if (encoder_corpus.personas.size() < 2)
    throw ConfigError("encoder corpus needs at least two characters");

  std::vector<std::vector<double>> feats;
  std::vector<std::size_t> speaker, emotion;
  for (std::size_t i = 0; i < encoder_corpus.utterances.size(); ++i) {
    const auto& u = encoder_corpus.utterances[i];
    if (u.split != corpus::Split::kTrain) continue;
    feats.push_back(contour_features(encoder_corpus.contours[i]));
    speaker.push_back(encoder_corpus.persona_index(u.character_id));
    emotion.push_back(corpus::index_of(u.emotion));
  }

  EvalEncoders out;
  ContourNetConfig scfg = cfg.speaker;
  scfg.kind = HeadKind::kEmbedding;
  scfg.num_classes = encoder_corpus.personas.size();
  ContourNet snet(scfg, Rng::derive(seed, "speaker-encoder/init"));
  train_contour_net(snet, feats, speaker, nullptr, Rng::derive(seed, "speaker-encoder/train"));
  out.speaker = SpeakerEncoder(std::move(snet));

  ContourNetConfig ecfg = cfg.emotion;
  ecfg.kind = HeadKind::kClassifier;
  ecfg.out_dim = corpus::kNumEmotions;
  ContourNet enet(ecfg, Rng::derive(seed, "emotion-classifier/init"));
  train_contour_net(enet, feats, emotion, nullptr, Rng::derive(seed, "emotion-classifier/train"));
  out.emotion = EmotionClassifier(std::move(enet));

  std::vector<corpus::Contour> held;
  std::vector<std::string> owners;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < encoder_corpus.utterances.size(); ++i) {
    const auto& u = encoder_corpus.utterances[i];
    if (u.split == corpus::Split::kTrain) continue;
    held.push_back(encoder_corpus.contours[i]);
    owners.push_back(u.character_id);
    labels.push_back(corpus::index_of(u.emotion));
  }
  out.speaker_cosine_gap = same_minus_different(out.speaker.embed_all(held), owners);
  out.emotion_accuracy = eea(out.emotion.predict_all(held), labels);
  return out;
}

std::string checkpoint_checksum(const nk::Checkpoint& ck) {
  return hex64(fnv1a_bytes(nk::encode_checkpoint(ck)));
}

}  // namespace duotrack::metrics
