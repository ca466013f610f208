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

// Command-line front end: data generation, training, inference, evaluation,
// ablations and retrieval.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "duotrack/core/errors.hpp"
#include "duotrack/core/hash.hpp"
#include "duotrack/core/log.hpp"
#include "duotrack/core/rng.hpp"
#include "duotrack/core/version.hpp"
#include "duotrack/corpus/io.hpp"
#include "duotrack/experiment/experiment.hpp"
#include "duotrack/metrics/encoders.hpp"
#include "duotrack/retrieval/retrieval.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace duotrack;

namespace {

// Every command resolves the same structure: file first, then flags.
struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> characters;
  std::optional<std::size_t> utterances;
  std::optional<double> unseen_fraction;
  std::optional<int> adapter_epochs;
  std::optional<int> flow_epochs;
  std::optional<int> projection_epochs;
  std::optional<int> encoder_epochs;
  std::string data_dir;
  std::string models_dir;
  std::string out_dir;
  std::string ablation;
  std::string split = "all";
  std::string variants;
  std::string utterance;
  std::string character;
  std::string query;
  std::string index_path;
  std::size_t k = 10;
  bool quiet = false;
};

struct Resolved {
  std::uint64_t seed = 1;
  corpus::CorpusParams corpus;
  experiment::SystemConfig system;
  metrics::EvalEncoderConfig encoders;
  json doc;  // canonical form the hash is taken over
  std::string hash;
};

Resolved resolve(const Options& o) {
  json file = json::object();
  if (!o.config_path.empty()) {
    try {
      file = json::parse(corpus::read_text_file(o.config_path));
    } catch (const json::exception& e) {
      throw ConfigError("config file " + o.config_path + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
  }
  Resolved r;
  try {
    r.seed = file.value("seed", r.seed);
    if (file.contains("corpus")) r.corpus = corpus::params_from_json(file.at("corpus"));
    r.system = experiment::system_config_from_json(file.value("system", json::object()));
    if (file.contains("encoder_epochs")) {
      const int e = file.at("encoder_epochs").get<int>();
      r.encoders.speaker.epochs = e;
      r.encoders.emotion.epochs = e;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (o.seed) r.seed = *o.seed;
  if (o.characters) r.corpus.num_characters = *o.characters;
  if (o.utterances) r.corpus.utterances_per_character = *o.utterances;
  if (o.unseen_fraction) r.corpus.unseen_fraction = *o.unseen_fraction;
  if (o.adapter_epochs) r.system.adapter.epochs = *o.adapter_epochs;
  if (o.flow_epochs) r.system.flow.epochs = *o.flow_epochs;
  if (o.projection_epochs) r.system.projection.epochs = *o.projection_epochs;
  if (o.encoder_epochs) {
    r.encoders.speaker.epochs = *o.encoder_epochs;
    r.encoders.emotion.epochs = *o.encoder_epochs;
  }
  r.system.check();
  if (r.encoders.speaker.epochs < 1) throw ConfigError("encoder_epochs must be positive");
  // The corpus seed is a named substream of the root seed.
  r.corpus.seed = Rng::derive(r.seed, "corpus");
  r.doc = json{{"seed", r.seed},
               {"corpus", corpus::to_json(r.corpus)},
               {"system", experiment::to_json(r.system)},
               {"encoder_epochs", r.encoders.speaker.epochs}};
  r.hash = hex64(fnv1a(r.doc.dump()));
  return r;
}

json stamp(const Resolved& r) { return json{{"version", version_string()}, {"config_hash", r.hash}}; }

std::string csv_header(const Resolved& r) {
  return fmt::format("# duotrack {} config {}\n", version_string(), r.hash);
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(flag + " is required");
}

fs::path out_dir(const Options& o) {
  require(o.out_dir, "--out");
  fs::create_directories(o.out_dir);
  return o.out_dir;
}

void write_json(const fs::path& p, json j, const Resolved& r) {
  j["provenance"] = stamp(r);
  corpus::write_text_file(p.string(), j.dump(2) + "\n");
}

corpus::Corpus load_data(const Options& o) {
  require(o.data_dir, "--data");
  return corpus::load_corpus(o.data_dir);
}

json read_manifest(const std::string& models_dir) {
  require(models_dir, "--models");
  const fs::path p = fs::path(models_dir) / "manifest.json";
  if (!fs::exists(p)) throw UsageError("no trained models in " + models_dir);
  try {
    return json::parse(corpus::read_text_file(p.string()));
  } catch (const json::exception& e) {
    throw DataError("manifest: " + std::string(e.what()));
  }
}

experiment::TrainedSystem load_system(const std::string& models_dir) {
  read_manifest(models_dir);
  experiment::TrainedSystem sys;
  sys.models = pipeline::load_models(models_dir);
  return sys;
}

retrieval::Projection load_projection(const std::string& models_dir) {
  const fs::path p = fs::path(models_dir) / "projection.dtck";
  if (!fs::exists(p)) throw UsageError("no retrieval projection in " + models_dir);
  return retrieval::Projection::from_checkpoint(nk::load_checkpoint(p.string()));
}

metrics::EvalEncoders train_encoders(const corpus::Corpus& c, const Resolved& r) {
  const auto enc = corpus::generate_corpus(corpus::encoder_corpus_params(c.params));
  return metrics::train_eval_encoders(enc, c, Rng::derive(r.seed, "encoders"), r.encoders);
}

json adapter_log_json(const std::vector<adapter::EpochLog>& log) {
  json out = json::array();
  for (const auto& e : log)
    out.push_back({{"epoch", e.epoch}, {"distill", e.distill}, {"semantic", e.semantic},
                   {"contrast", e.contrast}, {"total", e.total}, {"val_mse", e.val_mse}});
  return out;
}

experiment::Ablation ablation_or(const std::string& name, experiment::Ablation fallback) {
  return name.empty() ? fallback : experiment::parse_ablation(name);
}

// --- commands -------------------------------------------------------------

void cmd_gen_data(const Options& o) {
  const auto r = resolve(o);
  const auto dir = out_dir(o);
  const auto c = corpus::generate_corpus(r.corpus);
  corpus::save_corpus(c, dir.string(), stamp(r));
  write_json(dir / "config.json", r.doc, r);
  log_info(fmt::format("wrote {} personas and {} utterances to {}", c.personas.size(),
                       c.utterances.size(), dir.string()));
}

void cmd_train(const Options& o) {
  const auto r = resolve(o);
  const auto c = load_data(o);
  const auto dir = out_dir(o);
  const auto variant = ablation_or(o.ablation, experiment::Ablation::kFull);
  const auto seed = Rng::derive(r.seed, "train");
  log_info(fmt::format("training variant {} with seed {}", experiment::to_string(variant), seed));
  const auto sys = experiment::train_system(c, r.system, seed, variant);
  pipeline::save_models(sys.models, dir.string());

  const auto proj = retrieval::train_projection(c, sys.models.adapter, sys.models.timbre,
                                                sys.models.codebook, r.system.projection,
                                                Rng::derive(r.seed, "projection"));
  nk::save_checkpoint((dir / "projection.dtck").string(), proj.projection.to_checkpoint());

  write_json(dir / "training_log.json",
             {{"adapter", adapter_log_json(sys.adapter_log)},
              {"flow", {{"coarse_loss", sys.flow_log.coarse_loss}, {"fine_loss", sys.flow_log.fine_loss}}},
              {"projection", {{"loss", proj.epoch_loss}}}},
             r);
  write_json(dir / "manifest.json",
             {{"ablation", experiment::to_string(variant)},
              {"root_seed", r.seed},
              {"train_seed", seed},
              {"config", r.doc}},
             r);
  log_info("models written to " + dir.string());
}

void cmd_infer(const Options& o) {
  const auto r = resolve(o);
  const auto c = load_data(o);
  const auto sys = load_system(o.models_dir);
  require(o.utterance, "--utterance");
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < c.utterances.size(); ++i)
    if (c.utterances[i].utterance_id == o.utterance) found = i;
  if (!found) throw UsageError("unknown utterance '" + o.utterance + "'");
  auto u = c.utterances[*found];
  if (!o.character.empty()) {
    if (!c.has_persona(o.character)) throw UsageError("unknown character '" + o.character + "'");
    u.character_id = o.character;
  }
  const auto enrollment = pipeline::make_enrollment(c, r.system.unseen_enrollment);
  const auto library = pipeline::build_library(c, enrollment, c.targets);
  const auto voices = pipeline::build_voices(sys.models, library);
  const auto trace = pipeline::infer(c.persona(u.character_id), u, sys.models, library, voices,
                                     Rng::derive(r.seed, "infer:" + u.utterance_id), r.system.pipeline);
  auto j = pipeline::trace_json(trace, false);
  if (!o.out_dir.empty()) {
    const auto dir = out_dir(o);
    write_json(dir / "trace.json", j, r);
    corpus::write_text_file((dir / "contour.csv").string(), csv_header(r) + pipeline::contour_csv(trace.contour));
    std::vector<std::pair<std::string, corpus::Contour>> curves{{"generated", trace.contour}};
    if (u.character_id == c.utterances[*found].character_id) curves.emplace_back("ground truth", c.contours[*found]);
    corpus::write_text_file((dir / "contour.svg").string(), pipeline::contour_svg(curves));
  }
  j["provenance"] = stamp(r);
  std::cout << j.dump(2) << "\n";
}

void cmd_eval(const Options& o) {
  const auto r = resolve(o);
  const auto c = load_data(o);
  const auto manifest = read_manifest(o.models_dir);
  const auto sys = load_system(o.models_dir);
  if (o.split != "all" && o.split != "seen" && o.split != "unseen")
    throw UsageError("--split must be all, seen or unseen");
  const auto variant =
      ablation_or(o.ablation, experiment::parse_ablation(manifest.value("ablation", "full")));
  const auto dir = out_dir(o);
  const auto encoders = train_encoders(c, r);
  const auto ev = experiment::evaluate(c, sys, encoders, r.system, Rng::derive(r.seed, "eval"), variant);

  json report{{"ablation", experiment::to_string(variant)}, {"split", o.split}};
  std::vector<metrics::MetricReport> rows;
  if (o.split != "unseen") rows.push_back(ev.seen);
  if (o.split != "seen") rows.push_back(ev.unseen);
  if (o.split == "all") rows.push_back(ev.all);
  if (o.split == "unseen") {
    for (std::size_t k = 0; k < ev.utterances.size(); ++k) {
      const auto& u = c.utterances[ev.utterances[k]];
      if (u.seen) continue;
      if (c.persona(u.character_id).seen)
        throw LeakageError("seen character '" + u.character_id + "' in the unseen report");
    }
  }
  for (const auto& m : rows) {
    report[m.label] = metrics::to_json(m);
    corpus::write_text_file((dir / ("per_emotion_" + m.label + ".csv")).string(),
                            csv_header(r) + metrics::per_emotion_csv(m));
  }
  if (o.split == "all") {
    const auto id = experiment::identity_check(c, ev, encoders.speaker);
    report["identity"] = {{"cross_p95", id.cross_p95},
                          {"share_above", id.share_above},
                          {"median_same", id.median_same}};
  }
  report["encoders"] = {{"speaker_cosine_gap", encoders.speaker_cosine_gap},
                        {"emotion_accuracy", encoders.emotion_accuracy}};
  write_json(dir / "report.json", report, r);
  corpus::write_text_file((dir / "metrics.csv").string(), csv_header(r) + metrics::reports_csv(rows));
  for (const auto& m : rows)
    std::cout << fmt::format("{:<7} ccs {:.4f}  eer {:.4f}  radius {:.4f}  eea {:.4f}  f0_rmse {:.2f}\n",
                             m.label, m.ccs_cosine, m.eer, m.cluster_radius, m.eea, m.f0_rmse);
}

void cmd_ablate(const Options& o) {
  const auto r = resolve(o);
  const auto c = load_data(o);
  const auto dir = out_dir(o);
  std::vector<experiment::Ablation> variants{experiment::Ablation::kFull};
  if (o.variants.empty()) {
    for (auto a : experiment::all_ablations())
      if (a != experiment::Ablation::kFull) variants.push_back(a);
  } else {
    std::string name;
    for (std::size_t i = 0; i <= o.variants.size(); ++i) {
      if (i == o.variants.size() || o.variants[i] == ',') {
        if (!name.empty()) {
          const auto a = experiment::parse_ablation(name);
          if (std::find(variants.begin(), variants.end(), a) == variants.end()) variants.push_back(a);
        }
        name.clear();
      } else {
        name += o.variants[i];
      }
    }
  }
  const auto encoders = train_encoders(c, r);
  const auto train_seed = Rng::derive(r.seed, "train");
  const auto eval_seed = Rng::derive(r.seed, "eval");
  std::optional<experiment::TrainedSystem> full;
  std::vector<experiment::AblationRow> rows;
  json out = json::array();
  for (auto a : variants) {
    log_info("variant " + experiment::to_string(a));
    // Reference and persona variants act at evaluation time on the full model.
    const bool retrain = a == experiment::Ablation::kNoContrastive || a == experiment::Ablation::kNoTeacher;
    std::optional<experiment::TrainedSystem> own;
    if (retrain) {
      own = experiment::train_system(c, r.system, train_seed, a);
    } else if (!full) {
      full = experiment::train_system(c, r.system, train_seed, experiment::Ablation::kFull);
    }
    const auto ev = experiment::evaluate(c, retrain ? *own : *full, encoders, r.system, eval_seed, a);
    rows.push_back({a, ev.seen, ev.unseen, ev.all});
    out.push_back({{"variant", experiment::to_string(a)},
                   {"seen", metrics::to_json(ev.seen)},
                   {"unseen", metrics::to_json(ev.unseen)},
                   {"all", metrics::to_json(ev.all)}});
  }
  const auto table = experiment::ablation_csv(rows);
  corpus::write_text_file((dir / "ablation.csv").string(), csv_header(r) + table);
  write_json(dir / "ablation.json", {{"rows", out}}, r);
  std::cout << table;
}

void cmd_retrieve(const Options& o) {
  const auto r = resolve(o);
  std::optional<retrieval::RetrievalIndex> index;
  std::optional<corpus::Corpus> c;
  if (!o.data_dir.empty()) c = load_data(o);
  const auto sys = load_system(o.models_dir);
  const auto proj = load_projection(o.models_dir);

  if (!o.index_path.empty()) {
    if (!fs::exists(o.index_path + ".bin") || !fs::exists(o.index_path + ".json"))
      throw UsageError("missing index " + o.index_path);
    index = retrieval::RetrievalIndex::load(o.index_path);
  } else {
    if (!c) throw UsageError("either --index or --data is required");
    index = experiment::retrieval_gallery(*c, sys.models, proj);
    if (!o.out_dir.empty()) index->save((out_dir(o) / "index").string());
  }

  if (!o.query.empty()) {
    const auto q = retrieval::embed_text_query(o.query, "", sys.models.adapter, proj);
    json hits = json::array();
    for (const auto& h : index->search(q, o.k))
      hits.push_back({{"clip_id", h.clip_id}, {"character_id", h.character_id}, {"score", h.score}});
    json j{{"query", o.query}, {"k", o.k}, {"results", hits}, {"provenance", stamp(r)}};
    std::cout << j.dump(2) << "\n";
    return;
  }

  if (!c) throw UsageError("batch retrieval needs --data for the query descriptions");
  const auto queries = experiment::retrieval_queries(*c, sys.models, proj);
  const auto scores = retrieval::retrieval_metrics(queries, *index);
  const auto align = retrieval::alignment_matrix(queries, *index);
  json j = retrieval::to_json(scores);
  j["random_baseline"] = 1.0 / static_cast<double>(queries.size());
  j["alignment_diagonal"] = align.diagonal_mean();
  j["alignment_off_diagonal"] = align.off_diagonal_mean();
  if (!o.out_dir.empty()) {
    const auto dir = out_dir(o);
    write_json(dir / "retrieval.json", j, r);
    corpus::write_text_file((dir / "alignment.csv").string(), csv_header(r) + retrieval::alignment_csv(align));
    corpus::write_text_file((dir / "embeddings.csv").string(),
                            csv_header(r) + retrieval::embeddings_csv(queries, *index));
  }
  j["provenance"] = stamp(r);
  std::cout << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persona-conditioned prosody experiments on a synthetic corpus"};
  app.require_subcommand(1);
  Options o;
  app.set_version_flag("--version", version_string());

  const auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file; flags override it");
    sub->add_option("--seed", o.seed, "Root seed");
    sub->add_flag("--quiet", o.quiet, "Suppress progress messages");
  };
  const auto corpus_flags = [&o](CLI::App* sub) {
    sub->add_option("--characters", o.characters, "Characters in the corpus");
    sub->add_option("--utterances", o.utterances, "Utterances per character");
    sub->add_option("--unseen-fraction", o.unseen_fraction, "Share of held-out characters");
  };
  const auto training_flags = [&o](CLI::App* sub) {
    sub->add_option("--adapter-epochs", o.adapter_epochs);
    sub->add_option("--flow-epochs", o.flow_epochs);
    sub->add_option("--projection-epochs", o.projection_epochs);
  };

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus");
  common(gen);
  corpus_flags(gen);
  gen->add_option("--out", o.out_dir, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train timbre track, adapter, flow and projection");
  common(train);
  training_flags(train);
  train->add_option("--data", o.data_dir, "Corpus directory")->required();
  train->add_option("--out", o.out_dir, "Model directory")->required();
  train->add_option("--ablate", o.ablation, "Variant to train");

  auto* infer = app.add_subcommand("infer", "Synthesise one utterance");
  common(infer);
  infer->add_option("--data", o.data_dir)->required();
  infer->add_option("--models", o.models_dir)->required();
  infer->add_option("--utterance", o.utterance, "Utterance id from the corpus")->required();
  infer->add_option("--character", o.character, "Voice the utterance as this character");
  infer->add_option("--out", o.out_dir, "Directory for trace, CSV and SVG");

  auto* eval = app.add_subcommand("eval", "Score the test split");
  common(eval);
  eval->add_option("--data", o.data_dir)->required();
  eval->add_option("--models", o.models_dir)->required();
  eval->add_option("--out", o.out_dir)->required();
  eval->add_option("--split", o.split, "all, seen or unseen");
  eval->add_option("--ablate", o.ablation, "Evaluation-time variant");
  eval->add_option("--encoder-epochs", o.encoder_epochs);

  auto* ablate = app.add_subcommand("ablate", "Train and score every variant");
  common(ablate);
  training_flags(ablate);
  ablate->add_option("--data", o.data_dir)->required();
  ablate->add_option("--out", o.out_dir)->required();
  ablate->add_option("--variants", o.variants, "Comma-separated subset");
  ablate->add_option("--encoder-epochs", o.encoder_epochs);

  auto* retrieve = app.add_subcommand("retrieve", "Text-to-audio persona retrieval");
  common(retrieve);
  retrieve->add_option("--models", o.models_dir)->required();
  retrieve->add_option("--data", o.data_dir, "Corpus whose unseen clips form the gallery");
  retrieve->add_option("--index", o.index_path, "Saved index prefix");
  retrieve->add_option("--query", o.query, "Persona description; omit for batch metrics");
  retrieve->add_option("--k", o.k, "Results in single-query mode")->check(CLI::PositiveNumber);
  retrieve->add_option("--out", o.out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }
  set_quiet(o.quiet);

  try {
    if (*gen) cmd_gen_data(o);
    if (*train) cmd_train(o);
    if (*infer) cmd_infer(o);
    if (*eval) cmd_eval(o);
    if (*ablate) cmd_ablate(o);
    if (*retrieve) cmd_retrieve(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kUsage);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kInternal);
  }
  return 0;
}
