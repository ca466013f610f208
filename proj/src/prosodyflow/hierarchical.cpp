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

#include "duotrack/prosodyflow/hierarchical.hpp"

#include <algorithm>
#include <cmath>

#include "duotrack/adapter/train.hpp"
#include "duotrack/core/errors.hpp"
#include "duotrack/core/interp.hpp"
#include "duotrack/corpus/vocab.hpp"
#include "duotrack/numkernel/layers.hpp"
#include "duotrack/numkernel/optim.hpp"

namespace duotrack::flow {

using nlohmann::json;
using nk::Bound;
using nk::Tape;
using nk::Tensor;

namespace {

constexpr double kCoarseLo[] = {0.0, 0.0, 0.0, -1.0, -1.0};
constexpr double kCoarseHi[] = {1.0, 1.0, 1.0, 1.0, 1.0};

Tensor gather(const std::vector<std::vector<double>>& rows, std::span<const std::size_t> ids) {
  std::vector<std::vector<double>> out;
  out.reserve(ids.size());
  for (std::size_t i : ids) out.push_back(rows[i]);
  return nk::rows_of(out);
}

std::vector<double> train_stage(VelocityNet& net, const std::vector<std::vector<double>>& x1,
                                const std::vector<std::vector<double>>& cond, const FlowConfig& cfg,
                                Rng& rng) {
  nk::AdamW opt(net.params(), {0.9, 0.999, 1e-8, cfg.weight_decay});
  std::vector<double> losses;
  const std::size_t n = x1.size() * cfg.draws_per_item;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = nk::cosine_lr(cfg.lr, cfg.lr_floor, epoch, cfg.epochs);
    double total = 0.0;
    const auto batches = nk::minibatches(n, cfg.batch, rng);
    for (auto ids : batches) {
      for (auto& i : ids) i %= x1.size();
      Tape tape;
      Bound p(tape, net.params());
      const auto loss =
          cfm_train_loss(p, net, gather(x1, ids), gather(cond, ids), cfg.cond_dropout_prob, rng);
      total += loss.value().item();
      opt.step(net.params(), p.gradients(tape.backward(loss)), lr);
    }
    losses.push_back(total / static_cast<double>(batches.size()));
  }
  return losses;
}

}  // namespace

std::vector<double> fine_target(const corpus::Contour& c, std::size_t grid, double f0_range) {
  if (!(f0_range > 0.0)) throw DomainError("f0 range must be positive");
  if (c.f0.empty() || c.energy.size() != c.f0.size())
    throw DomainError("fine target needs a contour with matching f0 and energy");
  const auto f0 = segment_means(c.f0, grid);
  const auto en = segment_means(c.energy, grid);
  double mf = 0.0, me = 0.0;
  for (double v : c.f0) mf += v;
  for (double v : c.energy) me += v;
  mf /= static_cast<double>(c.f0.size());
  me /= static_cast<double>(c.energy.size());
  std::vector<double> out;
  out.reserve(2 * grid);
  for (double v : f0) out.push_back(std::clamp((v - mf) / f0_range, -kFineLimit, kFineLimit));
  for (double v : en)
    out.push_back(std::clamp((v - me) / kFineEnergyScale, -kFineLimit, kFineLimit));
  return out;
}

std::vector<double> persona_condition(std::span<const double> persona_embedding,
                                      std::size_t emotion_hint) {
  if (emotion_hint >= corpus::vocab::kNumHints) throw DomainError("emotion hint out of range");
  double n2 = 0.0;
  for (double v : persona_embedding) n2 += v * v;
  if (!(n2 > 0.0)) throw DomainError("persona embedding has zero norm");
  const double inv = 1.0 / std::sqrt(n2);
  std::vector<double> out;
  out.reserve(persona_embedding.size() + corpus::vocab::kNumHints);
  for (double v : persona_embedding) out.push_back(v * inv);
  for (std::size_t k = 0; k < corpus::vocab::kNumHints; ++k)
    out.push_back(k == emotion_hint ? 1.0 : 0.0);
  return out;
}

ProsodyFlow::ProsodyFlow(const FlowConfig& cfg, std::size_t persona_dim, std::uint64_t seed)
    : cfg_(cfg), persona_dim_(persona_dim) {
  cfg_.check();
  if (cfg_.coarse_dim != corpus::kProsodyDim) throw ConfigError("coarse_dim must be 5");
  coarse_ = VelocityNet(cfg_.coarse_dim, coarse_cond_dim(), cfg_.hidden, cfg_.blocks,
                        Rng::derive(seed, "flow-coarse-init"));
  fine_ = VelocityNet(2 * cfg_.fine_dim, fine_cond_dim(), cfg_.hidden, cfg_.blocks,
                      Rng::derive(seed, "flow-fine-init"));
}

std::size_t ProsodyFlow::coarse_cond_dim() const {
  return persona_dim_ + corpus::vocab::kNumHints;
}
std::size_t ProsodyFlow::fine_cond_dim() const { return coarse_cond_dim() + cfg_.coarse_dim; }

void ProsodyFlow::mark_trained(bool coarse, bool fine) {
  has_coarse_ = coarse;
  has_fine_ = fine;
}

void ProsodyFlow::set_sampling(int steps, double cfg_scale) {
  FlowConfig c = cfg_;
  c.steps = steps;
  c.cfg_scale = cfg_scale;
  c.check();
  cfg_ = c;
}

void ProsodyFlow::require_stage(bool present, const char* name) const {
  if (!present) throw ConfigError(std::string("prosody flow has no weights for the ") + name + " stage");
}

std::vector<double> ProsodyFlow::sample_coarse(std::span<const double> condition,
                                               std::uint64_t seed) const {
  require_stage(has_coarse_, "coarse");
  require_stage(has_fine_, "fine");
  const std::vector<double> c(condition.begin(), condition.end());
  const VelocityFn v = [&](const std::vector<double>& x, double t, bool conditional) {
    return conditional ? coarse_.velocity(x, t, c) : coarse_.velocity(x, t, {});
  };
  return euler_sample(v, cfg_.coarse_dim, cfg_.steps, cfg_.cfg_scale, seed, kCoarseLo, kCoarseHi);
}

std::vector<double> ProsodyFlow::sample_fine(std::span<const double> condition,
                                             std::span<const double> coarse,
                                             std::uint64_t seed) const {
  require_stage(has_coarse_, "coarse");
  require_stage(has_fine_, "fine");
  std::vector<double> c(condition.begin(), condition.end());
  c.insert(c.end(), coarse.begin(), coarse.end());
  const VelocityFn v = [&](const std::vector<double>& x, double t, bool conditional) {
    return conditional ? fine_.velocity(x, t, c) : fine_.velocity(x, t, {});
  };
  const std::vector<double> lo(2 * cfg_.fine_dim, -kFineLimit), hi(2 * cfg_.fine_dim, kFineLimit);
  return euler_sample(v, 2 * cfg_.fine_dim, cfg_.steps, cfg_.cfg_scale, seed, lo, hi);
}

FlowPrediction ProsodyFlow::predict(const adapter::AdapterOutput& out, std::span<const int> tokens,
                                    std::uint64_t seed) const {
  const auto cond = persona_condition(out.z, corpus::vocab::emotion_hint(tokens));
  FlowPrediction p;
  p.coarse = sample_coarse(cond, Rng::derive(seed, "flow-coarse"));
  p.fine = sample_fine(cond, p.coarse, Rng::derive(seed, "flow-fine"));
  return p;
}

nk::Checkpoint ProsodyFlow::to_checkpoint() const {
  nk::Checkpoint ck;
  ck.meta = json{{"kind", "prosody-flow"},
                 {"config", to_json(cfg_)},
                 {"persona_dim", persona_dim_},
                 {"coarse", has_coarse_},
                 {"fine", has_fine_}}
                .dump();
  if (has_coarse_) ck = flow::to_checkpoint(coarse_, "coarse.", std::move(ck));
  if (has_fine_) ck = flow::to_checkpoint(fine_, "fine.", std::move(ck));
  return ck;
}

ProsodyFlow ProsodyFlow::from_checkpoint(const nk::Checkpoint& ck) {
  json meta;
  try {
    meta = json::parse(ck.meta);
  } catch (const json::exception&) {
    throw DataError("checkpoint metadata is not JSON");
  }
  if (meta.value("kind", "") != "prosody-flow")
    throw DataError("checkpoint holds '" + meta.value("kind", "") + "', expected 'prosody-flow'");
  ProsodyFlow f(flow_config_from_json(meta.at("config")), meta.at("persona_dim").get<std::size_t>(),
                0);
  const auto& c = f.cfg_;
  if (meta.value("coarse", false)) {
    f.coarse_ = velocity_from_checkpoint(ck, "coarse.", c.coarse_dim, f.coarse_cond_dim(), c.hidden,
                                         c.blocks);
    f.has_coarse_ = true;
  }
  if (meta.value("fine", false)) {
    f.fine_ = velocity_from_checkpoint(ck, "fine.", 2 * c.fine_dim, f.fine_cond_dim(), c.hidden,
                                       c.blocks);
    f.has_fine_ = true;
  }
  return f;
}

TrainedFlow train_flow(const corpus::Corpus& corpus, const adapter::Adapter& model,
                       const FlowConfig& cfg, std::uint64_t seed,
                       const std::vector<corpus::ProsodyTarget>* targets) {
  cfg.check();
  adapter::check_training_split(corpus);
  const auto& tgt = targets != nullptr ? *targets : corpus.targets;
  if (tgt.size() != corpus.utterances.size())
    throw ContractError("one target per utterance is required");
  const auto train_idx = corpus.select(corpus::Split::kTrain, true);
  if (train_idx.empty()) throw ConfigError("flow training needs train utterances");

  std::vector<std::vector<double>> coarse_x, coarse_c, fine_x, fine_c;
  for (std::size_t i : train_idx) {
    const auto& u = corpus.utterances[i];
    const auto out = model.run(corpus.persona(u.character_id), u.token_ids);
    auto cond = persona_condition(out.z, corpus::vocab::emotion_hint(u.token_ids));
    const auto v = tgt[i].vector();
    coarse_x.emplace_back(v.begin(), v.end());
    coarse_c.push_back(cond);
    cond.insert(cond.end(), v.begin(), v.end());
    fine_c.push_back(std::move(cond));
    fine_x.push_back(fine_target(corpus.contours[i], cfg.fine_dim,
                                 corpus.persona(u.character_id).base_profile.f0_range));
  }

  TrainedFlow result{ProsodyFlow(cfg, model.config().z_dim, seed), {}};
  Rng rng_coarse(Rng::derive(seed, "flow-coarse-train"));
  result.log.coarse_loss = train_stage(result.flow.coarse_net(), coarse_x, coarse_c, cfg, rng_coarse);
  Rng rng_fine(Rng::derive(seed, "flow-fine-train"));
  result.log.fine_loss = train_stage(result.flow.fine_net(), fine_x, fine_c, cfg, rng_fine);
  result.flow.mark_trained(true, true);
  return result;
}

CoarseError coarse_error(const ProsodyFlow& flow, const adapter::Adapter& model,
                         const corpus::Corpus& corpus, const std::vector<std::size_t>& indices,
                         const std::vector<corpus::ProsodyTarget>& targets, std::uint64_t seed) {
  if (indices.empty()) throw ContractError("coarse error needs at least one utterance");
  const std::size_t dim = flow.config().coarse_dim;
  CoarseError e;
  for (std::size_t i : indices) {
    const auto& u = corpus.utterances.at(i);
    const auto out = model.run(corpus.persona(u.character_id), u.token_ids);
    const auto cond = persona_condition(out.z, corpus::vocab::emotion_hint(u.token_ids));
    const auto s = Rng::derive(seed, u.utterance_id);
    const auto sample = flow.sample_coarse(cond, s);
    const auto noise = initial_noise(dim, s);
    const auto t = targets.at(i).vector();
    for (std::size_t k = 0; k < dim; ++k) {
      e.model += std::abs(sample[k] - t[k]);
      e.noise += std::abs(std::clamp(noise[k], kCoarseLo[k], kCoarseHi[k]) - t[k]);
    }
  }
  const double n = static_cast<double>(indices.size() * dim);
  e.model /= n;
  e.noise /= n;
  return e;
}

}  // namespace duotrack::flow
