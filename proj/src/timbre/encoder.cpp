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

#include "duotrack/timbre/encoder.hpp"

#include <cmath>

#include "duotrack/core/errors.hpp"
#include "duotrack/core/rng.hpp"

namespace duotrack::timbre {

std::array<double, kProfileDim> profile_vector(const corpus::BaseProfile& p) {
  return {p.base_f0, p.f0_range, p.base_energy, p.base_rate};
}

metrics::ContourNetConfig default_timbre_config() {
  metrics::ContourNetConfig c;
  c.kind = metrics::HeadKind::kEmbedding;
  c.hidden = 64;
  c.out_dim = kTimbreDim;
  c.readout_dim = kProfileDim;
  c.readout_weight = 1.0;
  c.epochs = 40;
  return c;
}

std::vector<std::vector<double>> TimbreEncoder::utterance_embeddings(
    std::span<const corpus::Contour> cs) const {
  std::vector<std::vector<double>> feats;
  for (const auto& c : cs) feats.push_back(metrics::contour_features(c));
  auto out = net_.outputs(feats);
  for (auto& e : out) {
    double n2 = 0.0;
    for (double v : e) n2 += v * v;
    if (n2 == 0.0) throw DomainError("timbre embedding collapsed to zero");
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : e) v *= inv;
  }
  return out;
}

std::vector<double> TimbreEncoder::embed(std::span<const corpus::Contour> cs) const {
  if (cs.empty()) throw DomainError("timbre embedding needs at least one contour");
  const auto embs = utterance_embeddings(cs);
  std::vector<double> mean(embs[0].size(), 0.0);
  for (const auto& e : embs)
    for (std::size_t i = 0; i < e.size(); ++i) mean[i] += e[i];
  double n2 = 0.0;
  for (double& v : mean) {
    v /= static_cast<double>(embs.size());
    n2 += v * v;
  }
  if (n2 == 0.0) throw DomainError("pooled timbre embedding is zero");
  const double inv = 1.0 / std::sqrt(n2);
  for (double& v : mean) v *= inv;
  return mean;
}

corpus::BaseProfile TimbreEncoder::decode_profile(std::span<const double> timbre) const {
  const auto r = net_.readout(timbre);
  corpus::BaseProfile p;
  p.base_f0 = std::max(40.0, mean_[0] + std_[0] * r[0]);
  p.f0_range = std::max(0.0, mean_[1] + std_[1] * r[1]);
  p.base_energy = std::clamp(mean_[2] + std_[2] * r[2], 0.0, 1.0);
  p.base_rate = std::max(0.5, mean_[3] + std_[3] * r[3]);
  return p;
}

nk::Checkpoint TimbreEncoder::to_checkpoint() const {
  auto ck = net_.to_checkpoint("timbre-encoder");
  ck.put("profile.mean", nk::Tensor::vector({mean_.begin(), mean_.end()}));
  ck.put("profile.std", nk::Tensor::vector({std_.begin(), std_.end()}));
  return ck;
}

TimbreEncoder TimbreEncoder::from_checkpoint(const nk::Checkpoint& ck) {
  auto net = metrics::ContourNet::from_checkpoint(ck, "timbre-encoder");
  std::array<double, kProfileDim> m{}, s{};
  const auto& tm = ck.get("profile.mean");
  const auto& ts = ck.get("profile.std");
  if (tm.size() != kProfileDim || ts.size() != kProfileDim) throw DataError("bad profile stats");
  for (std::size_t i = 0; i < kProfileDim; ++i) {
    m[i] = tm[i];
    s[i] = ts[i];
  }
  return TimbreEncoder(std::move(net), m, s);
}

TimbreEncoder train_timbre_encoder(const corpus::Corpus& c, std::uint64_t seed,
                                   const metrics::ContourNetConfig& cfg) {
  std::vector<std::vector<double>> feats, targets;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < c.utterances.size(); ++i) {
    const auto& u = c.utterances[i];
    if (u.split != corpus::Split::kTrain) continue;
    const auto& persona = c.persona(u.character_id);
    if (!u.seen || !persona.seen)
      throw LeakageError("unseen character '" + u.character_id + "' in timbre encoder training");
    feats.push_back(metrics::contour_features(c.contours[i]));
    labels.push_back(c.persona_index(u.character_id));
    const auto pv = profile_vector(persona.base_profile);
    targets.emplace_back(pv.begin(), pv.end());
  }
  if (feats.empty()) throw ConfigError("no training utterances for the timbre encoder");

  std::array<double, kProfileDim> mean{}, sd{};
  for (const auto& t : targets)
    for (std::size_t k = 0; k < kProfileDim; ++k) mean[k] += t[k];
  for (double& m : mean) m /= static_cast<double>(targets.size());
  for (const auto& t : targets)
    for (std::size_t k = 0; k < kProfileDim; ++k) sd[k] += (t[k] - mean[k]) * (t[k] - mean[k]);
  for (double& s : sd) {
    s = std::sqrt(s / static_cast<double>(targets.size()));
    if (s < 1e-12) s = 1.0;
  }
  for (auto& t : targets)
    for (std::size_t k = 0; k < kProfileDim; ++k) t[k] = (t[k] - mean[k]) / sd[k];

  metrics::ContourNetConfig ncfg = cfg;
  ncfg.kind = metrics::HeadKind::kEmbedding;
  ncfg.num_classes = c.personas.size();
  metrics::ContourNet net(ncfg, Rng::derive(seed, "timbre-encoder/init"));
  metrics::train_contour_net(net, feats, labels, &targets, Rng::derive(seed, "timbre-encoder/train"));
  return TimbreEncoder(std::move(net), mean, sd);
}

}  // namespace duotrack::timbre
