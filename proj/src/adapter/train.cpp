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

#include "duotrack/adapter/train.hpp"

#include <filesystem>
#include <sstream>

#include <fmt/format.h>

#include "duotrack/core/errors.hpp"
#include "duotrack/core/rng.hpp"
#include "duotrack/numkernel/layers.hpp"
#include "duotrack/numkernel/ops.hpp"
#include "duotrack/numkernel/optim.hpp"

namespace duotrack::adapter {

using nlohmann::json;
using nk::Bound;
using nk::Tape;
using nk::Tensor;
using nk::Var;

namespace {

using Example = BatchExample;

Tensor anchor_row(const AnchorMap& anchors, const std::string& id) {
  auto it = anchors.find(id);
  if (it == anchors.end()) throw ContractError("no anchor for character " + id);
  return Tensor::matrix(1, it->second.size(), it->second);
}

AnchorMap mean_by_character(const std::vector<Example>& examples,
                            const std::vector<std::vector<double>>& z) {
  AnchorMap sums;
  std::map<std::string, double> counts;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const std::string& id = examples[i].persona->character_id;
    auto& s = sums[id];
    if (s.empty()) s.assign(z[i].size(), 0.0);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += z[i][k];
    counts[id] += 1.0;
  }
  for (auto& [id, s] : sums)
    for (double& v : s) v /= counts[id];
  return sums;
}

std::vector<std::vector<double>> inference_z(const Adapter& model,
                                             const std::vector<Example>& examples) {
  std::vector<std::vector<double>> out;
  out.reserve(examples.size());
  for (const Example& ex : examples) out.push_back(model.run(*ex.persona, ex.utterance->token_ids).z);
  return out;
}

json log_json(const std::vector<EpochLog>& log) {
  json arr = json::array();
  for (const auto& r : log)
    arr.push_back({r.epoch, r.distill, r.semantic, r.contrast, r.total, r.val_mse});
  return arr;
}

std::vector<EpochLog> log_from_json(const json& arr) {
  std::vector<EpochLog> log;
  for (const auto& r : arr)
    log.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(),
                   r.at(3).get<double>(), r.at(4).get<double>(), r.at(5).get<double>()});
  return log;
}

void save_state(const std::string& path, const Adapter& model, const nk::AdamW& opt,
                const AnchorMap& anchors, const Rng& rng, std::uint64_t seed, int epoch,
                const std::vector<EpochLog>& log) {
  nk::Checkpoint ck;
  json ids = json::array();
  for (const auto& [id, a] : anchors) {
    ids.push_back(id);
    ck.put("anchor." + id, Tensor::vector(a));
  }
  ck.meta = json{{"kind", "adapter-train-state"},
                 {"config", to_json(model.config())},
                 {"seed", seed},
                 {"epoch", epoch},
                 {"anchors", ids},
                 {"log", log_json(log)}}
                .dump();
  for (const auto& e : model.params().entries()) ck.put("param." + e.name, e.value);
  opt.save(ck, "opt.");
  const auto& s = rng.state();
  ck.put("rng", nk::pack_words(s));
  save_checkpoint(path, ck);
}

}  // namespace

BatchLoss batch_loss(Tape& tape, const Bound& p, const Adapter& model,
                     const std::vector<Example>& batch, const AnchorMap& anchors) {
  const AdapterConfig& cfg = model.config();
  std::vector<Var> p_hat, h, z;
  std::vector<std::vector<double>> p_rows, h_rows;
  for (const Example& ex : batch) {
    const ForwardVars f = model.forward(p, *ex.persona, ex.utterance->token_ids);
    p_hat.push_back(f.p_hat);
    h.push_back(f.h);
    z.push_back(f.z);
    const auto v = ex.target->vector();
    p_rows.emplace_back(v.begin(), v.end());
    h_rows.push_back(ex.target->rationale);
  }
  const Var P = nk::concat_rows(p_hat);
  const Var H = nk::concat_rows(h);
  const Var PT = tape.constant(nk::rows_of(p_rows));
  const Var HT = tape.constant(nk::rows_of(h_rows));

  BatchLoss out;
  const Var distill = distill_loss(P, PT, H, HT, cfg.lambda_sem, cfg.squared_norms);
  out.distill = distill.value().item();
  out.semantic = semantic_distance(H, HT, cfg.squared_norms).value().item();
  out.total = distill;
  for (const Var& v : z) out.z.emplace_back(v.value().data().begin(), v.value().data().end());

  if (cfg.lambda_con > 0.0) {
    const Var Z = nk::concat_rows(z);
    Var contrast;
    std::size_t terms = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::vector<std::size_t> neg;
      for (std::size_t j = 0; j < batch.size(); ++j)
        if (batch[j].persona->character_id != batch[i].persona->character_id) neg.push_back(j);
      if (neg.empty()) continue;
      const Var zp = tape.constant(anchor_row(anchors, batch[i].persona->character_id));
      const Var li = contrastive_loss(z[i], zp, nk::gather_rows(Z, neg), cfg.tau);
      contrast = terms == 0 ? li : nk::add(contrast, li);
      ++terms;
    }
    if (terms > 0) {
      contrast = nk::scale(contrast, 1.0 / static_cast<double>(terms));
      out.contrast = contrast.value().item();
      out.total = nk::add(distill, nk::scale(contrast, cfg.lambda_con));
    }
  }
  return out;
}

void check_training_split(const corpus::Corpus& corpus) {
  for (const auto& u : corpus.utterances) {
    if (u.split == corpus::Split::kTest) continue;
    if (!u.seen || !corpus.persona(u.character_id).seen) {
      throw LeakageError("utterance " + u.utterance_id + " of unseen character " + u.character_id +
                         " is in the " + std::string(corpus::to_string(u.split)) + " split");
    }
  }
}

double prosody_mse(const Adapter& model, const corpus::Corpus& corpus,
                   const std::vector<std::size_t>& indices,
                   const std::vector<corpus::ProsodyTarget>& targets) {
  if (indices.empty()) throw ContractError("prosody_mse needs at least one utterance");
  double total = 0.0;
  for (std::size_t i : indices) {
    const auto& u = corpus.utterances[i];
    const auto out = model.run(corpus.persona(u.character_id), u.token_ids);
    const auto t = targets[i].vector();
    double se = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) se += (out.p_hat[k] - t[k]) * (out.p_hat[k] - t[k]);
    total += se / static_cast<double>(t.size());
  }
  return total / static_cast<double>(indices.size());
}

TrainedAdapter train_adapter(const corpus::Corpus& corpus, const AdapterConfig& cfg,
                             std::uint64_t seed, const TrainOptions& options,
                             const std::vector<corpus::ProsodyTarget>* targets) {
  cfg.check();
  if (corpus.personas.size() < 2)
    throw ConfigError("adapter training needs at least two characters");
  const auto& tgt = targets != nullptr ? *targets : corpus.targets;
  if (tgt.size() != corpus.utterances.size())
    throw ContractError("one target per utterance is required");
  check_training_split(corpus);

  const auto train_idx = corpus.select(corpus::Split::kTrain, true);
  const auto val_idx = corpus.select(corpus::Split::kVal, true);
  if (train_idx.empty() || val_idx.empty())
    throw ConfigError("adapter training needs train and val utterances");
  std::vector<Example> examples;
  for (std::size_t i : train_idx) {
    const auto& u = corpus.utterances[i];
    examples.push_back({&corpus.persona(u.character_id), &u, &tgt[i]});
  }
  {
    std::map<std::string, int> chars;
    for (const auto& ex : examples) chars[ex.persona->character_id]++;
    if (chars.size() < 2) throw ConfigError("adapter training needs at least two characters");
  }

  TrainedAdapter result;
  result.model = Adapter(cfg, Rng::derive(seed, "adapter-init"));
  Adapter& model = result.model;
  nk::AdamW opt(model.params(), {0.9, 0.999, 1e-8, cfg.weight_decay});
  Rng rng(Rng::derive(seed, "adapter-batches"));
  AnchorMap& anchors = result.anchors;
  int start_epoch = 1;

  if (options.resume) {
    if (options.state_path.empty() || !std::filesystem::exists(options.state_path))
      throw UsageError("no training state to resume from: " + options.state_path);
    const nk::Checkpoint ck = nk::load_checkpoint(options.state_path);
    const json meta = json::parse(ck.meta);
    if (meta.value("kind", "") != "adapter-train-state")
      throw DataError("not an adapter training state: " + options.state_path);
    if (meta.at("config") != to_json(cfg) || meta.at("seed").get<std::uint64_t>() != seed)
      throw ConfigError("training state was written with a different config or seed");
    for (auto& e : model.params().entries()) e.value = ck.get("param." + e.name);
    opt.load(ck, "opt.");
    for (const auto& id : meta.at("anchors")) {
      const Tensor& a = ck.get("anchor." + id.get<std::string>());
      anchors[id.get<std::string>()].assign(a.data().begin(), a.data().end());
    }
    const auto words = nk::unpack_words(ck.get("rng"));
    Rng::State s{};
    std::copy(words.begin(), words.end(), s.begin());
    rng.set_state(s);
    result.log = log_from_json(meta.at("log"));
    start_epoch = meta.at("epoch").get<int>() + 1;
  } else {
    anchors = mean_by_character(examples, inference_z(model, examples));
    EpochLog row;
    double n = 0.0;
    for (std::size_t b = 0; b < examples.size(); b += cfg.batch) {
      const std::vector<Example> batch(
          examples.begin() + static_cast<long>(b),
          examples.begin() + static_cast<long>(std::min(examples.size(), b + cfg.batch)));
      Tape tape;
      Bound p(tape, model.params(), false);
      const BatchLoss bl = batch_loss(tape, p, model, batch, anchors);
      row.distill += bl.distill;
      row.semantic += bl.semantic;
      row.contrast += bl.contrast;
      row.total += bl.total.value().item();
      n += 1.0;
    }
    row.distill /= n;
    row.semantic /= n;
    row.contrast /= n;
    row.total /= n;
    row.val_mse = prosody_mse(model, corpus, val_idx, tgt);
    result.log.push_back(row);
  }

  for (int epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
    const double lr = nk::cosine_lr(cfg.lr, cfg.lr_floor, epoch - 1, cfg.epochs);
    EpochLog row;
    row.epoch = epoch;
    std::vector<Example> seen_order;
    std::vector<std::vector<double>> seen_z;
    const auto batches = nk::minibatches(examples.size(), cfg.batch, rng);
    for (const auto& ids : batches) {
      std::vector<Example> batch;
      for (std::size_t i : ids) batch.push_back(examples[i]);
      Tape tape;
      Bound p(tape, model.params());
      BatchLoss bl = batch_loss(tape, p, model, batch, anchors);
      row.distill += bl.distill;
      row.semantic += bl.semantic;
      row.contrast += bl.contrast;
      row.total += bl.total.value().item();
      for (std::size_t k = 0; k < batch.size(); ++k) {
        seen_order.push_back(batch[k]);
        seen_z.push_back(std::move(bl.z[k]));
      }
      opt.step(model.params(), p.gradients(tape.backward(bl.total)), lr);
    }
    const double n = static_cast<double>(batches.size());
    row.distill /= n;
    row.semantic /= n;
    row.contrast /= n;
    row.total /= n;
    row.val_mse = prosody_mse(model, corpus, val_idx, tgt);
    result.log.push_back(row);
    anchors = mean_by_character(seen_order, seen_z);

    if (!options.state_path.empty())
      save_state(options.state_path, model, opt, anchors, rng, seed, epoch, result.log);
    if (options.stop_after_epoch >= 0 && epoch >= options.stop_after_epoch) break;
  }
  return result;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,distill,semantic,contrast,total,val_mse\n";
  for (const auto& r : log) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.epoch, r.distill,
                       r.semantic, r.contrast, r.total, r.val_mse);
  }
  return out.str();
}

}  // namespace duotrack::adapter
