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

#include "duotrack/experiment/experiment.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "duotrack/core/errors.hpp"
#include "duotrack/core/rng.hpp"
#include "duotrack/corpus/teacher.hpp"
#include "duotrack/metrics/scores.hpp"

namespace duotrack::experiment {

using nlohmann::json;

const std::vector<Ablation>& all_ablations() {
  static const std::vector<Ablation> v{Ablation::kFull, Ablation::kNoContrastive,
                                       Ablation::kNoTeacher, Ablation::kRandomReference,
                                       Ablation::kShuffledPersona};
  return v;
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoContrastive: return "no_contrastive";
    case Ablation::kNoTeacher: return "no_teacher";
    case Ablation::kRandomReference: return "random_reference";
    case Ablation::kShuffledPersona: return "shuffled_persona";
  }
  return "full";
}

Ablation parse_ablation(const std::string& s) {
  for (Ablation a : all_ablations())
    if (to_string(a) == s) return a;
  throw UsageError("unknown ablation '" + s + "'");
}

void SystemConfig::check() const {
  adapter.check();
  flow.check();
  if (codebook_levels < 2) throw ConfigError("codebook needs at least two levels");
  if (unseen_enrollment == 0) throw ConfigError("unseen_enrollment must be positive");
  projection.check();
}

namespace {

json contour_net_json(const metrics::ContourNetConfig& c) {
  return json{{"hidden", c.hidden}, {"epochs", c.epochs}, {"batch", c.batch},
              {"lr", c.lr},         {"weight_decay", c.weight_decay},
              {"readout_weight", c.readout_weight}};
}

void contour_net_from_json(const json& j, metrics::ContourNetConfig& c) {
  c.hidden = j.value("hidden", c.hidden);
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.readout_weight = j.value("readout_weight", c.readout_weight);
}

}  // namespace

json to_json(const SystemConfig& c) {
  return json{{"adapter", adapter::to_json(c.adapter)},
              {"flow", flow::to_json(c.flow)},
              {"timbre", contour_net_json(c.timbre)},
              {"codebook_levels", c.codebook_levels},
              {"pipeline", pipeline::to_json(c.pipeline)},
              {"unseen_enrollment", c.unseen_enrollment},
              {"projection", retrieval::to_json(c.projection)}};
}

SystemConfig system_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  SystemConfig c;
  try {
    if (j.contains("adapter")) c.adapter = adapter::adapter_config_from_json(j.at("adapter"));
    if (j.contains("flow")) c.flow = flow::flow_config_from_json(j.at("flow"));
    if (j.contains("timbre")) contour_net_from_json(j.at("timbre"), c.timbre);
    if (j.contains("pipeline")) c.pipeline = pipeline::pipeline_config_from_json(j.at("pipeline"));
    c.codebook_levels = j.value("codebook_levels", c.codebook_levels);
    c.unseen_enrollment = j.value("unseen_enrollment", c.unseen_enrollment);
    if (j.contains("projection")) c.projection = retrieval::projection_config_from_json(j.at("projection"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.check();
  return c;
}

std::vector<corpus::ProsodyTarget> targets_for(const corpus::Corpus& corpus, Ablation a) {
  if (a != Ablation::kNoTeacher) return corpus.targets;
  std::vector<corpus::ProsodyTarget> out;
  out.reserve(corpus.utterances.size());
  for (const auto& u : corpus.utterances) out.push_back(corpus::constant_target(u));
  return out;
}

TrainedSystem train_system(const corpus::Corpus& corpus, const SystemConfig& cfg,
                           std::uint64_t seed, Ablation a) {
  cfg.check();
  adapter::check_training_split(corpus);
  const auto targets = targets_for(corpus, a);
  TrainedSystem sys;

  // The timbre encoder plays the part of a pretrained speaker model: it learns
  // on a separate corpus whose characters never appear in `corpus`.
  const auto pre = corpus::generate_corpus(corpus::timbre_corpus_params(corpus.params));
  metrics::check_disjoint(pre, corpus);
  sys.models.timbre = timbre::train_timbre_encoder(pre, Rng::derive(seed, "timbre"), cfg.timbre);
  std::vector<corpus::Contour> pre_contours;
  for (std::size_t i : pre.select(corpus::Split::kTrain, true)) pre_contours.push_back(pre.contours[i]);
  sys.models.codebook =
      timbre::fit_codebook(sys.models.timbre.utterance_embeddings(pre_contours),
                           cfg.codebook_levels, Rng::derive(seed, "codebook"));

  auto acfg = cfg.adapter;
  if (a == Ablation::kNoContrastive) acfg.lambda_con = 0.0;
  auto trained = adapter::train_adapter(corpus, acfg, Rng::derive(seed, "adapter"), {}, &targets);
  sys.models.adapter = std::move(trained.model);
  sys.adapter_log = std::move(trained.log);

  auto tf = flow::train_flow(corpus, sys.models.adapter, cfg.flow, Rng::derive(seed, "flow"), &targets);
  sys.models.flow = std::move(tf.flow);
  sys.flow_log = std::move(tf.log);
  return sys;
}

std::map<std::string, std::string> encoder_checksums(const metrics::EvalEncoders& e) {
  return {{"speaker", metrics::checkpoint_checksum(e.speaker.net().to_checkpoint("speaker-encoder"))},
          {"emotion",
           metrics::checkpoint_checksum(e.emotion.net().to_checkpoint("emotion-classifier"))}};
}

metrics::MetricReport score(const std::string& label, const corpus::Corpus& corpus,
                            const std::vector<std::size_t>& utterances,
                            const std::vector<corpus::Contour>& generated,
                            const metrics::EvalEncoders& encoders, std::uint64_t seed) {
  if (utterances.size() != generated.size() || utterances.empty())
    throw ContractError("score: one generated contour per utterance is required");
  std::vector<corpus::Contour> refs;
  std::vector<std::string> owner;
  std::vector<std::size_t> labels;
  for (std::size_t i : utterances) {
    refs.push_back(corpus.contours[i]);
    owner.push_back(corpus.utterances[i].character_id);
    labels.push_back(corpus::index_of(corpus.utterances[i].emotion));
  }
  const auto gen_emb = encoders.speaker.embed_all(generated);
  const auto ref_emb = encoders.speaker.embed_all(refs);
  const auto predicted = encoders.emotion.predict_all(generated);
  const std::size_t n = utterances.size();

  metrics::MetricReport r;
  r.label = label;
  r.utterances = n;
  r.ccs_cosine = metrics::ccs_cosine(gen_emb, ref_emb);

  std::vector<double> genuine, impostor;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (owner[i] == owner[j]) genuine.push_back(metrics::cosine(gen_emb[i], ref_emb[j]));
  Rng rng(Rng::derive(seed, "eer-impostors"));
  const bool any_cross = std::any_of(owner.begin(), owner.end(),
                                     [&](const std::string& o) { return o != owner[0]; });
  if (!any_cross) throw ContractError("score: EER needs at least two characters");
  while (impostor.size() < genuine.size()) {
    const std::size_t i = rng.below(n), j = rng.below(n);
    if (owner[i] != owner[j]) impostor.push_back(metrics::cosine(gen_emb[i], ref_emb[j]));
  }
  r.eer = metrics::compute_eer(genuine, impostor).eer;
  r.ccs_eer = 1.0 - r.eer;

  std::map<std::string, std::vector<metrics::Embedding>> by_char;
  for (std::size_t i = 0; i < n; ++i) by_char[owner[i]].push_back(gen_emb[i]);
  r.cluster_radius = metrics::cluster_radius_ratio(by_char);
  r.eea = metrics::eea(predicted, labels);

  double rmse = 0.0;
  std::vector<double> per_utt(n);
  for (std::size_t i = 0; i < n; ++i) {
    per_utt[i] = metrics::f0_rmse(generated[i], refs[i]);
    rmse += per_utt[i];
  }
  r.f0_rmse = rmse / static_cast<double>(n);

  for (std::size_t e = 0; e < corpus::kNumEmotions; ++e) {
    std::vector<metrics::Embedding> g, f;
    std::vector<std::size_t> p, l;
    double sum_rmse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] != e) continue;
      g.push_back(gen_emb[i]);
      f.push_back(ref_emb[i]);
      p.push_back(predicted[i]);
      l.push_back(labels[i]);
      sum_rmse += per_utt[i];
    }
    if (g.empty()) continue;
    r.per_emotion.push_back({std::string(corpus::to_string(corpus::emotion_from_index(e))), g.size(),
                             metrics::ccs_cosine(g, f), metrics::eea(p, l),
                             sum_rmse / static_cast<double>(g.size())});
  }
  r.encoder_checksums = encoder_checksums(encoders);
  r.check();
  return r;
}

Evaluation evaluate(const corpus::Corpus& corpus, const TrainedSystem& system,
                    const metrics::EvalEncoders& encoders, const SystemConfig& cfg,
                    std::uint64_t seed, Ablation a) {
  const auto enrollment = pipeline::make_enrollment(corpus, cfg.unseen_enrollment);
  const auto library = pipeline::build_library(corpus, enrollment, targets_for(corpus, a));
  const auto voices = pipeline::build_voices(system.models, library);
  auto pcfg = cfg.pipeline;
  if (a == Ablation::kRandomReference) pcfg.reference_mode = pipeline::ReferenceMode::kRandom;

  // Persona fields handed to the adapter and flow; the shuffled variant takes
  // them from another character while keeping identity and references.
  std::map<std::string, corpus::PersonaConfig> persona_of;
  for (const auto& p : corpus.personas) persona_of[p.character_id] = p;
  if (a == Ablation::kShuffledPersona) {
    const std::size_t n = corpus.personas.size();
    Rng rng(Rng::derive(seed, "persona-shuffle"));
    const std::size_t shift = 1 + rng.below(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& donor = corpus.personas[(i + shift) % n];
      auto& p = persona_of[corpus.personas[i].character_id];
      p.archetype = donor.archetype;
      p.volatility = donor.volatility;
      p.speech_pattern = donor.speech_pattern;
      p.description = donor.description;
    }
  }

  Evaluation ev;
  for (bool seen : {true, false}) {
    const auto idx = pipeline::evaluation_indices(corpus, enrollment, seen);
    std::vector<corpus::Contour> generated;
    for (std::size_t i : idx) {
      const auto& u = corpus.utterances[i];
      auto tr = pipeline::infer(persona_of.at(u.character_id), u, system.models, library, voices,
                                Rng::derive(seed, u.utterance_id), pcfg);
      generated.push_back(tr.contour);
      ev.traces.push_back(std::move(tr));
      ev.utterances.push_back(i);
    }
    auto report = score(seen ? "seen" : "unseen", corpus, idx, generated, encoders,
                        Rng::derive(seed, seen ? "score-seen" : "score-unseen"));
    (seen ? ev.seen : ev.unseen) = std::move(report);
  }
  std::vector<corpus::Contour> generated;
  for (const auto& t : ev.traces) generated.push_back(t.contour);
  ev.all = score("all", corpus, ev.utterances, generated, encoders, Rng::derive(seed, "score-all"));
  return ev;
}

IdentityCheck identity_check(const corpus::Corpus& corpus, const Evaluation& ev,
                             const metrics::SpeakerEncoder& encoder) {
  std::vector<corpus::Contour> contours;
  for (const auto& t : ev.traces) contours.push_back(t.contour);
  const auto emb = encoder.embed_all(contours);
  IdentityCheck out;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    const auto& ui = corpus.utterances[ev.utterances[i]];
    for (std::size_t j = i + 1; j < emb.size(); ++j) {
      const auto& uj = corpus.utterances[ev.utterances[j]];
      const double c = metrics::cosine(emb[i], emb[j]);
      if (ui.character_id != uj.character_id) {
        out.cross_character.push_back(c);
      } else if (ui.emotion != uj.emotion) {
        out.same_character_cross_emotion.push_back(c);
      }
    }
  }
  if (out.cross_character.empty() || out.same_character_cross_emotion.empty())
    throw ContractError("identity check needs pairs of both kinds");
  out.cross_p95 = metrics::quantile(out.cross_character, 0.95);
  std::size_t above = 0;
  for (double c : out.same_character_cross_emotion)
    if (c > out.cross_p95) ++above;
  out.share_above =
      static_cast<double>(above) / static_cast<double>(out.same_character_cross_emotion.size());
  out.median_same = metrics::quantile(out.same_character_cross_emotion, 0.5);
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "variant,split,ccs_cosine,d_ccs_cosine,ccs_eer,d_ccs_eer,cluster_radius,d_cluster_radius,"
         "eea,d_eea,f0_rmse,d_f0_rmse\n";
  if (rows.empty()) return out.str();
  for (const auto& row : rows) {
    using Member = metrics::MetricReport AblationRow::*;
    for (Member part : {&AblationRow::seen, &AblationRow::unseen, &AblationRow::all}) {
      const auto& r = row.*part;
      const auto& b = rows.front().*part;
      out << fmt::format("{},{},{:.6f},{:+.6f},{:.6f},{:+.6f},{:.6f},{:+.6f},{:.6f},{:+.6f},{:.6f},{:+.6f}\n",
                         to_string(row.variant), r.label, r.ccs_cosine, r.ccs_cosine - b.ccs_cosine,
                         r.ccs_eer, r.ccs_eer - b.ccs_eer, r.cluster_radius,
                         r.cluster_radius - b.cluster_radius, r.eea, r.eea - b.eea, r.f0_rmse,
                         r.f0_rmse - b.f0_rmse);
    }
  }
  return out.str();
}

std::vector<retrieval::SharedEmbedding> retrieval_queries(const corpus::Corpus& corpus,
                                                          const pipeline::Models& models,
                                                          const retrieval::Projection& projection) {
  std::vector<retrieval::SharedEmbedding> out;
  for (const auto& id : corpus.character_ids(false))
    out.push_back(retrieval::embed_text_query(corpus.persona(id).description, id, models.adapter,
                                              projection));
  if (out.empty()) throw ConfigError("retrieval needs unseen characters");
  return out;
}

retrieval::RetrievalIndex retrieval_gallery(const corpus::Corpus& corpus, const pipeline::Models& models,
                                            const retrieval::Projection& projection) {
  std::vector<retrieval::GalleryItem> items;
  for (std::size_t i : corpus.select(corpus::Split::kTest, false)) {
    const auto& u = corpus.utterances[i];
    items.push_back({u.utterance_id, retrieval::embed_audio_item(corpus.contours[i], u.character_id,
                                                                 models.timbre, models.codebook,
                                                                 projection)});
  }
  if (items.empty()) throw ConfigError("retrieval gallery is empty");
  return retrieval::RetrievalIndex(std::move(items));
}

corpus::CorpusParams retrieval_corpus_params() {
  corpus::CorpusParams p;
  p.num_characters = 50;
  p.utterances_per_character = 40;
  p.unseen_fraction = 0.4;
  p.seed = 11;
  p.id_prefix = "ret";
  return p;
}

RetrievalStudy run_retrieval_study(const RetrievalStudyConfig& cfg, std::uint64_t seed) {
  if (cfg.untrained_inits == 0) throw ConfigError("untrained_inits must be positive");
  const auto corpus = corpus::generate_corpus(cfg.corpus);
  SystemConfig sc;
  sc.adapter.epochs = cfg.adapter_epochs;
  sc.check();
  adapter::check_training_split(corpus);

  pipeline::Models models;
  const auto pre = corpus::generate_corpus(corpus::timbre_corpus_params(corpus.params));
  metrics::check_disjoint(pre, corpus);
  models.timbre = timbre::train_timbre_encoder(pre, Rng::derive(seed, "timbre"), sc.timbre);
  std::vector<corpus::Contour> pre_contours;
  for (std::size_t i : pre.select(corpus::Split::kTrain, true)) pre_contours.push_back(pre.contours[i]);
  models.codebook = timbre::fit_codebook(models.timbre.utterance_embeddings(pre_contours),
                                         sc.codebook_levels, Rng::derive(seed, "codebook"));
  models.adapter = adapter::train_adapter(corpus, sc.adapter, Rng::derive(seed, "adapter")).model;

  RetrievalStudy st;
  st.random_baseline = 1.0 / static_cast<double>(corpus.character_ids(false).size());
  auto untrained_cfg = cfg.projection;
  untrained_cfg.epochs = 0;
  for (std::size_t k = 0; k < cfg.untrained_inits; ++k) {
    const auto p = retrieval::train_projection(corpus, models.adapter, models.timbre, models.codebook,
                                               untrained_cfg,
                                               Rng::derive(seed, fmt::format("projection-untrained:{}", k)));
    st.untrained.push_back(retrieval::retrieval_metrics(retrieval_queries(corpus, models, p.projection),
                                                        retrieval_gallery(corpus, models, p.projection)));
    st.untrained_map += st.untrained.back().map / static_cast<double>(cfg.untrained_inits);
  }
  auto trained = retrieval::train_projection(corpus, models.adapter, models.timbre, models.codebook,
                                             cfg.projection, Rng::derive(seed, "projection"));
  const auto queries = retrieval_queries(corpus, models, trained.projection);
  const auto gallery = retrieval_gallery(corpus, models, trained.projection);
  st.trained = retrieval::retrieval_metrics(queries, gallery);
  st.alignment = retrieval::alignment_matrix(queries, gallery);
  st.epoch_loss = std::move(trained.epoch_loss);
  return st;
}

}  // namespace duotrack::experiment
