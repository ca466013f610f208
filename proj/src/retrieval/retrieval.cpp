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

#include "duotrack/retrieval/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "duotrack/core/errors.hpp"
#include "duotrack/core/rng.hpp"
#include "duotrack/numkernel/layers.hpp"
#include "duotrack/numkernel/ops.hpp"
#include "duotrack/numkernel/optim.hpp"
#include "duotrack/prosodyflow/hierarchical.hpp"

namespace duotrack::retrieval {

using json = nlohmann::json;
using nk::Tensor;
using nk::Var;

namespace {

constexpr double kUnitTolerance = 1e-9;

void normalize(std::vector<double>& v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  if (n2 == 0.0) throw DomainError("cannot normalise a zero vector");
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool is_unit(const std::vector<double>& v) {
  return v.size() == kSharedDim && std::abs(std::sqrt(dot(v, v)) - 1.0) <= kUnitTolerance;
}

// Drops each word with probability `p`, keeping at least one.
std::string drop_words(const std::string& description, double p, Rng& rng) {
  std::vector<std::string> words;
  std::string w;
  for (char ch : description) {
    if (std::isspace(static_cast<unsigned char>(ch)) != 0) {
      if (!w.empty()) words.push_back(std::move(w));
      w.clear();
    } else {
      w += ch;
    }
  }
  if (!w.empty()) words.push_back(std::move(w));
  std::string out;
  for (const auto& word : words)
    if (!rng.bernoulli(p)) out += (out.empty() ? "" : " ") + word;
  return out.empty() ? words[rng.below(words.size())] : out;
}

Tensor scaler_tensor(const std::vector<double>& v) { return Tensor::vector(v); }

metrics::FeatureScaler scaler_from(const nk::Checkpoint& ck, const std::string& name) {
  metrics::FeatureScaler s;
  s.mean = ck.get(name + ".mean").values();
  s.stddev = ck.get(name + ".std").values();
  if (s.mean.size() != s.stddev.size() || s.mean.empty())
    throw DataError("checkpoint scaler " + name + " is malformed");
  return s;
}

}  // namespace

std::string to_string(Modality m) { return m == Modality::kText ? "text" : "audio"; }

void ProjectionConfig::check() const {
  if (text_hidden == 0 || audio_hidden == 0) throw ConfigError("projection hidden widths must be positive");
  if (fine_grid < 2) throw ConfigError("projection fine_grid must be at least 2");
  if (!(tau > 0.0)) throw ConfigError("projection tau must be positive");
  if (epochs < 0 || steps_per_epoch < 1) throw ConfigError("projection epochs/steps out of range");
  if (batch < 2) throw ConfigError("projection batch needs at least two characters");
  if (!(word_dropout >= 0.0 && word_dropout < 1.0)) throw ConfigError("word_dropout must be in [0, 1)");
  if (!(lr > 0.0) || lr_floor < 0.0 || weight_decay < 0.0)
    throw ConfigError("projection learning rates must be positive");
}

json to_json(const ProjectionConfig& c) {
  return json{{"text_hidden", c.text_hidden}, {"audio_hidden", c.audio_hidden},
              {"fine_grid", c.fine_grid},     {"tau", c.tau},
              {"epochs", c.epochs},           {"steps_per_epoch", c.steps_per_epoch},
              {"batch", c.batch},             {"word_dropout", c.word_dropout},
              {"lr", c.lr},
              {"lr_floor", c.lr_floor},       {"weight_decay", c.weight_decay}};
}

ProjectionConfig projection_config_from_json(const json& j) {
  ProjectionConfig c;
  try {
    c.text_hidden = j.value("text_hidden", c.text_hidden);
    c.audio_hidden = j.value("audio_hidden", c.audio_hidden);
    c.fine_grid = j.value("fine_grid", c.fine_grid);
    c.tau = j.value("tau", c.tau);
    c.epochs = j.value("epochs", c.epochs);
    c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
    c.batch = j.value("batch", c.batch);
    c.word_dropout = j.value("word_dropout", c.word_dropout);
    c.lr = j.value("lr", c.lr);
    c.lr_floor = j.value("lr_floor", c.lr_floor);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("projection config: ") + e.what());
  }
  c.check();
  return c;
}

std::vector<double> text_features(const adapter::Adapter& adapter, const std::string& description) {
  if (std::all_of(description.begin(), description.end(),
                  [](unsigned char ch) { return std::isspace(ch) != 0; }))
    throw DomainError("empty persona description");
  return adapter.encode_description(description);
}

std::vector<double> audio_features(const corpus::Contour& contour, const timbre::TimbreEncoder& timbre,
                                   const timbre::SQCodebook& codebook, std::size_t fine_grid) {
  if (contour.f0.empty() || contour.energy.size() != contour.f0.size() || contour.durations.empty())
    throw DomainError("malformed contour");
  const corpus::Contour one[] = {contour};
  const auto code = timbre::quantize(timbre.embed(one), codebook);
  const auto profile = timbre.decode_profile(code.quantized);
  // The decoded range can reach zero for an extreme clip.
  const double range = std::max(profile.f0_range, 1.0);
  std::vector<double> out = code.quantized;
  const auto fine = flow::fine_target(contour, fine_grid, range);
  out.insert(out.end(), fine.begin(), fine.end());
  const auto stats = metrics::contour_features(contour);
  out.insert(out.end(), stats.begin(), stats.end());
  return out;
}

Projection::Projection(metrics::FeatureScaler text_scaler, metrics::FeatureScaler audio_scaler,
                       const ProjectionConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), text_scaler_(std::move(text_scaler)), audio_scaler_(std::move(audio_scaler)) {
  cfg_.check();
  Rng rng(seed);
  nk::add_mlp(params_, "text", {text_scaler_.mean.size(), cfg_.text_hidden, kSharedDim}, rng);
  nk::add_mlp(params_, "audio", {audio_scaler_.mean.size(), cfg_.audio_hidden, kSharedDim}, rng);
}

Var Projection::text_head(const nk::Bound& p, Var x) const {
  return nk::normalize_rows(nk::mlp(p, "text", x, 2));
}

Var Projection::audio_head(const nk::Bound& p, Var x) const {
  return nk::normalize_rows(nk::mlp(p, "audio", x, 2));
}

std::vector<double> Projection::embed(const std::string& head, const metrics::FeatureScaler& s,
                                      const std::vector<double>& features) const {
  nk::Tape tape;
  const nk::Bound p(tape, params_, false);
  const Var x = tape.constant(nk::rows_of({s.apply(features)}));
  const Var y = head == "text" ? text_head(p, x) : audio_head(p, x);
  std::vector<double> out = y.value().values();
  // Renormalise in double so the unit-norm bound holds exactly.
  normalize(out);
  return out;
}

std::vector<double> Projection::embed_text(const std::vector<double>& features) const {
  return embed("text", text_scaler_, features);
}

std::vector<double> Projection::embed_audio(const std::vector<double>& features) const {
  return embed("audio", audio_scaler_, features);
}

nk::Checkpoint Projection::to_checkpoint() const {
  nk::Checkpoint ck;
  ck.meta = json{{"kind", "retrieval-projection"}, {"config", to_json(cfg_)}}.dump();
  ck.put("text_scaler.mean", scaler_tensor(text_scaler_.mean));
  ck.put("text_scaler.std", scaler_tensor(text_scaler_.stddev));
  ck.put("audio_scaler.mean", scaler_tensor(audio_scaler_.mean));
  ck.put("audio_scaler.std", scaler_tensor(audio_scaler_.stddev));
  for (const auto& e : params_.entries()) ck.put("proj." + e.name, e.value);
  return ck;
}

Projection Projection::from_checkpoint(const nk::Checkpoint& ck) {
  json meta;
  try {
    meta = json::parse(ck.meta);
  } catch (const json::exception&) {
    throw DataError("checkpoint metadata is not JSON");
  }
  if (meta.value("kind", "") != "retrieval-projection")
    throw DataError("checkpoint holds '" + meta.value("kind", "") +
                    "', expected 'retrieval-projection'");
  Projection p(scaler_from(ck, "text_scaler"), scaler_from(ck, "audio_scaler"),
               projection_config_from_json(meta.at("config")), 0);
  for (auto& e : p.params_.entries()) {
    const Tensor& t = ck.get("proj." + e.name);
    if (!t.same_shape(e.value)) throw DataError("checkpoint tensor proj." + e.name + " has wrong shape");
    e.value = t;
  }
  return p;
}

SharedEmbedding embed_text_query(const std::string& description, const std::string& character_id,
                                 const adapter::Adapter& adapter, const Projection& projection) {
  return {projection.embed_text(text_features(adapter, description)), Modality::kText, character_id};
}

SharedEmbedding embed_audio_item(const corpus::Contour& contour, const std::string& character_id,
                                 const timbre::TimbreEncoder& timbre,
                                 const timbre::SQCodebook& codebook, const Projection& projection) {
  return {projection.embed_audio(audio_features(contour, timbre, codebook, projection.config().fine_grid)),
          Modality::kAudio, character_id};
}

Var symmetric_info_nce(Var text, Var audio, double tau) {
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  const std::size_t n = text.value().rows();
  if (n < 2 || audio.value().rows() != n || audio.value().cols() != text.value().cols())
    throw ShapeError("symmetric_info_nce: need matching batches of at least two rows");
  const Var sims = nk::scale(nk::matmul(text, nk::transpose(audio)), 1.0 / tau);
  std::vector<std::size_t> diag(n);
  std::iota(diag.begin(), diag.end(), 0);
  const Var t2a = nk::cross_entropy_mean(sims, diag);
  const Var a2t = nk::cross_entropy_mean(nk::transpose(sims), diag);
  return nk::scale(nk::add(t2a, a2t), 0.5);
}

double symmetric_info_nce_value(const std::vector<std::vector<double>>& text,
                                const std::vector<std::vector<double>>& audio, double tau) {
  nk::Tape tape;
  return symmetric_info_nce(tape.constant(nk::rows_of(text)), tape.constant(nk::rows_of(audio)), tau)
      .value()
      .item();
}

TrainedProjection train_projection(const corpus::Corpus& corpus, const adapter::Adapter& adapter,
                                   const timbre::TimbreEncoder& timbre,
                                   const timbre::SQCodebook& codebook, const ProjectionConfig& cfg,
                                   std::uint64_t seed) {
  cfg.check();
  // Clips grouped by character, train split only.
  std::map<std::string, std::vector<std::size_t>> clips;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i)
    if (corpus.utterances[i].split == corpus::Split::kTrain) clips[corpus.utterances[i].character_id].push_back(i);
  if (clips.size() < 2) throw ConfigError("projection training needs at least two characters");

  std::vector<std::string> characters;
  std::vector<std::vector<double>> text_raw;
  std::map<std::size_t, std::vector<double>> audio_raw;
  for (const auto& [id, idx] : clips) {
    characters.push_back(id);
    text_raw.push_back(text_features(adapter, corpus.persona(id).description));
    for (std::size_t i : idx)
      audio_raw[i] = audio_features(corpus.contours[i], timbre, codebook, cfg.fine_grid);
  }
  std::vector<std::vector<double>> audio_rows;
  for (const auto& [i, f] : audio_raw) audio_rows.push_back(f);

  TrainedProjection out{Projection(metrics::FeatureScaler::fit(text_raw),
                                   metrics::FeatureScaler::fit(audio_rows), cfg,
                                   Rng::derive(seed, "projection/init")),
                        {}};
  Projection& proj = out.projection;

  Rng rng(Rng::derive(seed, "projection/train"));
  nk::AdamW opt(proj.params(), {0.9, 0.999, 1e-8, cfg.weight_decay});
  const std::size_t b = std::min(cfg.batch, characters.size());
  std::vector<std::size_t> order(characters.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = nk::cosine_lr(cfg.lr, cfg.lr_floor, epoch, cfg.epochs);
    double total = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order.begin(), order.end());
      std::vector<std::vector<double>> tb, ab;
      for (std::size_t k = 0; k < b; ++k) {
        const std::string& id = characters[order[k]];
        const auto& idx = clips.at(id);
        const std::size_t clip = idx[rng.below(idx.size())];
        const auto& u = corpus.utterances[clip];
        if (!u.seen || !corpus.persona(id).seen)
          throw LeakageError("unseen character '" + id + "' in a projection training batch");
        const auto& desc = corpus.persona(id).description;
        tb.push_back(proj.text_scaler().apply(
            cfg.word_dropout > 0.0 ? text_features(adapter, drop_words(desc, cfg.word_dropout, rng))
                                   : text_raw[order[k]]));
        ab.push_back(proj.audio_scaler().apply(audio_raw.at(clip)));
      }
      nk::Tape tape;
      const nk::Bound p(tape, proj.params());
      const Var loss = symmetric_info_nce(proj.text_head(p, tape.constant(nk::rows_of(tb))),
                                          proj.audio_head(p, tape.constant(nk::rows_of(ab))), cfg.tau);
      total += loss.value().item();
      opt.step(proj.params(), p.gradients(tape.backward(loss)), lr);
    }
    out.epoch_loss.push_back(total / cfg.steps_per_epoch);
  }
  return out;
}

RetrievalIndex::RetrievalIndex(std::vector<GalleryItem> items) : items_(std::move(items)) {
  std::set<std::string> ids;
  for (const auto& it : items_) {
    if (it.embedding.modality != Modality::kAudio)
      throw ContractError("gallery item '" + it.clip_id + "' is not an audio embedding");
    if (!is_unit(it.embedding.vector))
      throw ContractError("gallery item '" + it.clip_id + "' is not a unit vector of the shared width");
    if (!ids.insert(it.clip_id).second) throw ContractError("duplicate gallery clip '" + it.clip_id + "'");
  }
}

std::vector<Hit> RetrievalIndex::search(const SharedEmbedding& query, std::size_t k) const {
  if (k == 0) throw ContractError("search needs k >= 1");
  if (items_.empty()) throw ContractError("search on an empty gallery");
  if (query.vector.size() != kSharedDim) throw ShapeError("query has the wrong width");
  std::vector<Hit> hits;
  hits.reserve(items_.size());
  for (const auto& it : items_)
    hits.push_back({it.clip_id, it.embedding.character_id, dot(query.vector, it.embedding.vector)});
  const auto better = [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.clip_id < b.clip_id;
  };
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);
  hits.resize(n);
  return hits;
}

void RetrievalIndex::save(const std::string& path) const {
  nk::Checkpoint ck;
  Tensor vectors = Tensor::matrix(items_.size(), kSharedDim);
  json clips = json::array();
  for (std::size_t r = 0; r < items_.size(); ++r) {
    std::copy(items_[r].embedding.vector.begin(), items_[r].embedding.vector.end(), vectors.row(r).begin());
    clips.push_back({{"clip_id", items_[r].clip_id}, {"character_id", items_[r].embedding.character_id}});
  }
  ck.meta = json{{"kind", "retrieval-index"}, {"dim", kSharedDim}}.dump();
  ck.put("vectors", std::move(vectors));
  nk::save_checkpoint(path + ".bin", ck);
  std::ofstream f(path + ".json");
  if (!f) throw DataError("cannot write " + path + ".json");
  f << json{{"dim", kSharedDim}, {"clips", clips}}.dump(2) << "\n";
}

RetrievalIndex RetrievalIndex::load(const std::string& path) {
  const auto ck = nk::load_checkpoint(path + ".bin");
  std::ifstream f(path + ".json");
  if (!f) throw DataError("cannot read " + path + ".json");
  json meta;
  try {
    meta = json::parse(f);
  } catch (const json::exception& e) {
    throw DataError(std::string("index metadata: ") + e.what());
  }
  const Tensor& v = ck.get("vectors");
  const auto& clips = meta.at("clips");
  if (v.rows() != clips.size() || v.cols() != kSharedDim)
    throw DataError("index vectors do not match the metadata");
  std::vector<GalleryItem> items;
  for (std::size_t r = 0; r < clips.size(); ++r) {
    const auto row = v.row(r);
    items.push_back({clips[r].at("clip_id").get<std::string>(),
                     {std::vector<double>(row.begin(), row.end()), Modality::kAudio,
                      clips[r].at("character_id").get<std::string>()}});
  }
  return RetrievalIndex(std::move(items));
}

RetrievalScores score_rankings(const std::vector<std::vector<bool>>& relevance) {
  RetrievalScores s;
  for (const auto& ranks : relevance) {
    const auto total = static_cast<std::size_t>(std::count(ranks.begin(), ranks.end(), true));
    if (total == 0) throw ContractError("retrieval query without a relevant gallery item");
    double ap = 0.0;
    std::size_t hits = 0, first = 0;
    for (std::size_t r = 0; r < ranks.size(); ++r) {
      if (!ranks[r]) continue;
      ++hits;
      if (first == 0) first = r + 1;
      ap += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    s.map += ap / static_cast<double>(total);
    s.mrr += 1.0 / static_cast<double>(first);
    s.r1 += first <= 1 ? 1.0 : 0.0;
    s.r5 += first <= 5 ? 1.0 : 0.0;
    s.r10 += first <= 10 ? 1.0 : 0.0;
  }
  s.queries = relevance.size();
  if (s.queries > 0) {
    const double n = static_cast<double>(s.queries);
    s.map /= n;
    s.mrr /= n;
    s.r1 /= n;
    s.r5 /= n;
    s.r10 /= n;
  }
  return s;
}

RetrievalScores retrieval_metrics(const std::vector<SharedEmbedding>& queries,
                                  const RetrievalIndex& index) {
  std::vector<std::vector<bool>> relevance;
  for (const auto& q : queries) {
    std::vector<bool> flags;
    for (const auto& h : index.search(q, index.size())) flags.push_back(h.character_id == q.character_id);
    relevance.push_back(std::move(flags));
  }
  return score_rankings(relevance);
}

json to_json(const RetrievalScores& s) {
  return json{{"queries", s.queries}, {"mAP", s.map}, {"R@1", s.r1},
              {"R@5", s.r5},          {"R@10", s.r10}, {"MRR", s.mrr}};
}

double AlignmentMatrix::diagonal_mean() const {
  if (values.empty()) throw ContractError("empty alignment matrix");
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += values[i][i];
  return s / static_cast<double>(values.size());
}

double AlignmentMatrix::off_diagonal_mean() const {
  if (values.size() < 2) throw ContractError("alignment matrix needs two characters");
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < values.size(); ++j)
      if (i != j) s += values[i][j];
  const auto n = static_cast<double>(values.size());
  return s / (n * (n - 1.0));
}

AlignmentMatrix alignment_matrix(const std::vector<SharedEmbedding>& queries,
                                 const RetrievalIndex& index) {
  AlignmentMatrix m;
  std::map<std::string, std::size_t> col;
  for (const auto& q : queries) {
    if (col.count(q.character_id) != 0) throw ContractError("one text query per character expected");
    col[q.character_id] = m.characters.size();
    m.characters.push_back(q.character_id);
  }
  const std::size_t n = m.characters.size();
  m.values.assign(n, std::vector<double>(n, 0.0));
  std::vector<std::size_t> counts(n, 0);
  for (const auto& it : index.items()) {
    const auto c = col.find(it.embedding.character_id);
    if (c == col.end()) continue;
    ++counts[c->second];
    for (std::size_t i = 0; i < n; ++i) m.values[i][c->second] += dot(queries[i].vector, it.embedding.vector);
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (counts[j] == 0) throw ContractError("no gallery clips for '" + m.characters[j] + "'");
    for (std::size_t i = 0; i < n; ++i) m.values[i][j] /= static_cast<double>(counts[j]);
  }
  return m;
}

std::string alignment_csv(const AlignmentMatrix& m) {
  std::string out = "text\\audio";
  for (const auto& c : m.characters) out += "," + c;
  out += "\n";
  for (std::size_t i = 0; i < m.characters.size(); ++i) {
    out += m.characters[i];
    for (double v : m.values[i]) out += fmt::format(",{:.6f}", v);
    out += "\n";
  }
  return out;
}

std::string embeddings_csv(const std::vector<SharedEmbedding>& queries, const RetrievalIndex& index) {
  std::string out = "modality,character_id,clip_id";
  for (std::size_t k = 0; k < kSharedDim; ++k) out += fmt::format(",e{}", k);
  out += "\n";
  const auto row = [&out](const SharedEmbedding& e, const std::string& clip) {
    out += to_string(e.modality) + "," + e.character_id + "," + clip;
    for (double v : e.vector) out += fmt::format(",{:.6f}", v);
    out += "\n";
  };
  for (const auto& q : queries) row(q, "");
  for (const auto& it : index.items()) row(it.embedding, it.clip_id);
  return out;
}

}  // namespace duotrack::retrieval
