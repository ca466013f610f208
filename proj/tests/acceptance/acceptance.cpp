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

// Acceptance runner. Prints one PASS/FAIL line per criterion on stdout and
// exits non-zero if any criterion fails. Usage: acceptance <path-to-duotrack-cli>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "duotrack/adapter/train.hpp"
#include "duotrack/core/errors.hpp"
#include "duotrack/core/log.hpp"
#include "duotrack/core/rng.hpp"
#include "duotrack/corpus/generate.hpp"
#include "duotrack/corpus/io.hpp"
#include "duotrack/experiment/experiment.hpp"
#include "duotrack/metrics/encoders.hpp"
#include "duotrack/metrics/scores.hpp"
#include "duotrack/numkernel/layers.hpp"
#include "duotrack/pipeline/pipeline.hpp"
#include "duotrack/prosodyflow/flow.hpp"
#include "duotrack/prosodyflow/hierarchical.hpp"
#include "duotrack/retrieval/retrieval.hpp"
#include "duotrack/timbre/codebook.hpp"
#include "duotrack/timbre/encoder.hpp"
#include "json.hpp"
#include "support/flow_oracle.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace duotrack;
using A = experiment::Ablation;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<double> random_vec(Rng& rng, std::size_t n, double s = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = s * rng.normal();
  return v;
}

nk::Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  nk::Tensor t = nk::Tensor::zeros({r, c});
  for (double& v : t.data()) v = rng.normal();
  return t;
}

// Tight-fraction accumulator over several gradient checks of one network.
struct GradTally {
  std::size_t checked = 0;
  std::size_t tight = 0;
  double worst = 0.0;

  void add(const testing::GradCheckResult& r) {
    checked += r.checked;
    tight += r.within_tight;
    worst = std::max(worst, r.worst);
  }
  double fraction() const { return checked ? static_cast<double>(tight) / static_cast<double>(checked) : 0.0; }
};

template <typename LossOf>
testing::GradCheckResult gradcheck(nk::ParamStore& params, LossOf loss_of, std::size_t stride) {
  nk::Tape tape;
  const nk::Bound p(tape, params);
  const auto analytic = p.gradients(tape.backward(loss_of(tape, p)));
  return testing::check_gradients(params, analytic, [&] {
    nk::Tape t;
    const nk::Bound q(t, params, false);
    return loss_of(t, q).value().item();
  }, 1e-6, 1e-4, 1e-3, stride);
}

// --- 1 ----------------------------------------------------------------------

Outcome gradient_suite() {
  constexpr int kBatches = 20;
  corpus::CorpusParams cp;
  cp.num_characters = 4;
  cp.utterances_per_character = 20;
  cp.seed = 11;
  const auto corpus = corpus::generate_corpus(cp);
  auto targets = corpus.targets;
  for (auto& t : targets) t.rationale.resize(16);
  const auto train = corpus.select(corpus::Split::kTrain, true);

  adapter::AdapterConfig ac;
  ac.num_layers = 2;
  ac.hidden_dim = 8;
  ac.num_heads = 2;
  ac.rationale_dim = 16;
  ac.z_dim = 6;
  ac.desc_buckets = 32;

  flow::FlowConfig fc;
  fc.hidden = 12;
  fc.fine_dim = 4;
  flow::ProsodyFlow pf(fc, 8, 5);

  GradTally adapter_t, coarse_t, fine_t, speaker_t, emotion_t, proj_t;
  for (int b = 0; b < kBatches; ++b) {
    Rng rng(Rng::derive(1, "gradcheck:" + std::to_string(b)));

    adapter::Adapter model(ac, 100 + b);
    adapter::AnchorMap anchors;
    for (const auto& p : corpus.personas) anchors[p.character_id] = random_vec(rng, ac.z_dim);
    std::vector<adapter::BatchExample> batch;
    for (int k = 0; k < 5; ++k) {
      const std::size_t i = train[rng.below(train.size())];
      const auto& u = corpus.utterances[i];
      batch.push_back({&corpus.persona(u.character_id), &u, &targets[i]});
    }
    adapter_t.add(gradcheck(
        model.params(),
        [&](nk::Tape& t, const nk::Bound& p) { return adapter::batch_loss(t, p, model, batch, anchors).total; },
        7));

    for (auto* net : {&pf.coarse_net(), &pf.fine_net()}) {
      const std::size_t rows = 4;
      const auto x1 = random_matrix(rng, rows, net->x_dim());
      const auto x0 = random_matrix(rng, rows, net->x_dim());
      const auto c = random_matrix(rng, rows, net->cond_dim());
      std::vector<double> t(rows);
      for (double& v : t) v = rng.uniform();
      std::vector<bool> dropped(rows);
      for (std::size_t r = 0; r < rows; ++r) dropped[r] = rng.bernoulli(0.3);
      for (auto& e : net->params().entries())
        for (double& v : e.value.data()) v += 0.02 * rng.normal();
      const auto r = gradcheck(
          net->params(),
          [&](nk::Tape&, const nk::Bound& p) { return flow::cfm_loss_at(p, *net, x1, x0, t, c, dropped); }, 5);
      (net == &pf.coarse_net() ? coarse_t : fine_t).add(r);
    }

    for (auto kind : {metrics::HeadKind::kEmbedding, metrics::HeadKind::kClassifier}) {
      metrics::ContourNetConfig cfg;
      cfg.kind = kind;
      cfg.hidden = 6;
      cfg.out_dim = kind == metrics::HeadKind::kEmbedding ? 4 : 3;
      cfg.num_classes = 3;
      cfg.readout_dim = kind == metrics::HeadKind::kEmbedding ? 2 : 0;
      metrics::ContourNet net(cfg, 200 + b);
      const auto x = random_matrix(rng, 6, metrics::kFeatureDim);
      const auto ro = random_matrix(rng, 6, 2);
      std::vector<std::size_t> labels(6);
      for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 3;
      std::swap(labels[rng.below(6)], labels[rng.below(6)]);
      const nk::Tensor* rop = cfg.readout_dim ? &ro : nullptr;
      const auto r = gradcheck(
          net.params, [&](nk::Tape& t, const nk::Bound& p) { return net.loss(p, t.constant(x), labels, rop); }, 1);
      (kind == metrics::HeadKind::kEmbedding ? speaker_t : emotion_t).add(r);
    }

    retrieval::ProjectionConfig pc;
    pc.text_hidden = 16;
    pc.audio_hidden = 16;
    metrics::FeatureScaler ts{std::vector<double>(12, 0.0), std::vector<double>(12, 1.0)};
    metrics::FeatureScaler as{std::vector<double>(20, 0.0), std::vector<double>(20, 1.0)};
    retrieval::Projection proj(ts, as, pc, 300 + b);
    std::vector<std::vector<double>> tx, ax;
    for (int i = 0; i < 4; ++i) {
      tx.push_back(random_vec(rng, 12));
      ax.push_back(random_vec(rng, 20));
    }
    proj_t.add(gradcheck(
        proj.params(),
        [&](nk::Tape& t, const nk::Bound& p) {
          return retrieval::symmetric_info_nce(proj.text_head(p, t.constant(nk::rows_of(tx))),
                                               proj.audio_head(p, t.constant(nk::rows_of(ax))), 0.07);
        },
        11));
  }
  const std::vector<std::pair<std::string, GradTally>> all{
      {"adapter", adapter_t}, {"flow-coarse", coarse_t}, {"flow-fine", fine_t},
      {"speaker", speaker_t}, {"emotion", emotion_t},    {"projection", proj_t}};
  Outcome o{true, ""};
  for (const auto& [name, t] : all) {
    o.pass = o.pass && t.fraction() >= 0.95;
    o.detail += fmt::format("{} {:.3f} ", name, t.fraction());
  }
  o.detail += fmt::format("within 1e-4 over {} minibatches", kBatches);
  return o;
}

// --- 2 ----------------------------------------------------------------------

Outcome loss_oracles() {
  constexpr int kCases = 1000;
  Rng rng(2);
  double worst_d = 0.0, worst_c = 0.0, worst_f = 0.0;
  for (int i = 0; i < kCases; ++i) {
    const std::size_t pd = 1 + rng.below(8), hd = 1 + rng.below(64);
    const auto a = random_vec(rng, pd), b = random_vec(rng, pd);
    const auto ha = random_vec(rng, hd), hb = random_vec(rng, hd);
    const double lam = rng.uniform(0.0, 2.0);
    worst_d = std::max(worst_d, std::abs(adapter::distill_loss_value(a, b, ha, hb, lam) -
                                         testing::plain_distill_loss(a, b, ha, hb, lam)));

    const std::size_t d = 1 + rng.below(12);
    const auto zi = random_vec(rng, d), zp = random_vec(rng, d);
    std::vector<std::vector<double>> negs(1 + rng.below(6));
    for (auto& n : negs) n = random_vec(rng, d);
    const double tau = rng.uniform(0.05, 2.0);
    worst_c = std::max(worst_c, std::abs(adapter::contrastive_loss_value(zi, zp, negs, tau) -
                                         testing::plain_contrastive_loss(zi, zp, negs, tau)));

    const std::size_t xd = 1 + rng.below(6), cd = 1 + rng.below(5), hidden = 4 + rng.below(6);
    const std::size_t blocks = rng.below(3);
    flow::VelocityNet net(xd, cd, hidden, blocks, 1000 + i);
    for (auto& e : net.params().entries())
      for (double& v : e.value.data()) v += 0.1 * rng.normal();
    const auto x1 = random_vec(rng, xd), c = random_vec(rng, cd);
    const double drop = i % 3 == 0 ? 1.0 : (i % 3 == 1 ? 0.0 : 0.5);
    const std::uint64_t s = rng.next_u64();
    Rng ra(s), rb(s);
    const double got = flow::cfm_train_loss_value(net, x1, c, drop, ra);
    const double want = testing::plain_cfm_loss(net.params(), blocks, x1, c, drop, rb);
    worst_f = std::max(worst_f, std::abs(got - want) / std::max(1.0, std::abs(want)));
  }
  return {worst_d <= 1e-10 && worst_c <= 1e-10 && worst_f <= 1e-10,
          fmt::format("worst deviation over {} inputs: distill {:.1e}, contrastive {:.1e}, cfm {:.1e}", kCases,
                      worst_d, worst_c, worst_f)};
}

// --- 3 to 6 and 11 share the desk study -------------------------------------

struct SeedRun {
  experiment::Evaluation full, random_ref, no_contrastive, no_teacher;
  experiment::IdentityCheck identity;
  std::vector<adapter::EpochLog> adapter_log;
  flow::CoarseError coarse;
};

struct DeskStudy {
  std::vector<SeedRun> seeds;
};

const DeskStudy& desk_study() {
  static const DeskStudy study = [] {
    DeskStudy s;
    const corpus::CorpusParams p;  // 10 seen + 4 unseen characters, 50 utterances each
    const auto c = corpus::generate_corpus(p);
    const auto enc = corpus::generate_corpus(corpus::encoder_corpus_params(p));
    const auto encoders = metrics::train_eval_encoders(enc, c, 11);
    const experiment::SystemConfig cfg;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      log_info(fmt::format("desk study seed {}", seed));
      SeedRun r;
      const auto full = experiment::train_system(c, cfg, seed, A::kFull);
      r.full = experiment::evaluate(c, full, encoders, cfg, seed, A::kFull);
      r.random_ref = experiment::evaluate(c, full, encoders, cfg, seed, A::kRandomReference);
      r.identity = experiment::identity_check(c, r.full, encoders.speaker);
      r.adapter_log = full.adapter_log;
      r.coarse = flow::coarse_error(full.models.flow, full.models.adapter, c,
                                    c.select(corpus::Split::kVal, true), c.targets, seed);
      const auto nc = experiment::train_system(c, cfg, seed, A::kNoContrastive);
      r.no_contrastive = experiment::evaluate(c, nc, encoders, cfg, seed, A::kNoContrastive);
      const auto nt = experiment::train_system(c, cfg, seed, A::kNoTeacher);
      r.no_teacher = experiment::evaluate(c, nt, encoders, cfg, seed, A::kNoTeacher);
      s.seeds.push_back(std::move(r));
    }
    return s;
  }();
  return study;
}

Outcome training_effectiveness() {
  const auto& r = desk_study().seeds.front();
  const double v0 = r.adapter_log.front().val_mse, v1 = r.adapter_log.back().val_mse;
  const bool adapter_ok = v1 <= 0.5 * v0;
  const bool flow_ok = r.coarse.model <= 0.5 * r.coarse.noise;
  return {adapter_ok && flow_ok,
          fmt::format("adapter val MSE {:.4f} -> {:.4f} ({:.0f}% drop); coarse error {:.4f} vs noise {:.4f}", v0,
                      v1, 100.0 * (1.0 - v1 / v0), r.coarse.model, r.coarse.noise)};
}

Outcome contrastive_direction() {
  int agree = 0;
  std::string detail;
  for (std::size_t k = 0; k < desk_study().seeds.size(); ++k) {
    const auto& f = desk_study().seeds[k].full.all;
    const auto& n = desk_study().seeds[k].no_contrastive.all;
    const bool ok = f.cluster_radius < n.cluster_radius && f.ccs_cosine >= n.ccs_cosine;
    agree += ok ? 1 : 0;
    detail += fmt::format("seed {}: radius {:.4f} vs {:.4f}, ccs {:.4f} vs {:.4f}; ", k + 1, f.cluster_radius,
                          n.cluster_radius, f.ccs_cosine, n.ccs_cosine);
  }
  return {agree >= 2, detail + fmt::format("{}/3 seeds agree", agree)};
}

Outcome teacher_direction() {
  int agree = 0;
  std::string detail;
  for (std::size_t k = 0; k < desk_study().seeds.size(); ++k) {
    const double f = desk_study().seeds[k].full.all.eea, n = desk_study().seeds[k].no_teacher.all.eea;
    agree += f > n ? 1 : 0;
    detail += fmt::format("seed {}: EEA {:.4f} vs constant targets {:.4f}; ", k + 1, f, n);
  }
  return {agree == 3, detail + fmt::format("{}/3 seeds agree", agree)};
}

// Exhaustive nearest library entry with ties to the smaller clip_id.
std::string nearest_clip(const std::vector<pipeline::LibraryEntry>& lib, const std::array<double, 3>& q) {
  double best = std::numeric_limits<double>::infinity();
  std::string clip;
  for (const auto& e : lib) {
    double d = 0.0;
    for (int k = 0; k < 3; ++k) d += (e.vad[k] - q[k]) * (e.vad[k] - q[k]);
    if (d < best || (d == best && e.clip_id < clip)) {
      best = d;
      clip = e.clip_id;
    }
  }
  return clip;
}

Outcome reference_direction() {
  int agree = 0;
  std::string detail;
  for (std::size_t k = 0; k < desk_study().seeds.size(); ++k) {
    const double f = desk_study().seeds[k].full.all.eea, r = desk_study().seeds[k].random_ref.all.eea;
    agree += f > r ? 1 : 0;
    detail += fmt::format("seed {}: EEA {:.4f} vs random {:.4f}; ", k + 1, f, r);
  }
  constexpr int kCases = 10000;
  int exact = 0;
  Rng rng(6);
  for (int trial = 0; trial < kCases; ++trial) {
    std::vector<pipeline::LibraryEntry> lib(1 + rng.below(40));
    for (auto& e : lib) {
      e.clip_id = "clip" + std::to_string(rng.below(1000));
      for (double& v : e.vad)
        v = trial % 2 ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform();
    }
    std::array<double, 3> q;
    for (double& v : q) v = trial % 2 ? static_cast<double>(rng.below(9)) / 8.0 : rng.uniform();
    exact += lib[pipeline::select_reference(lib, q)].clip_id == nearest_clip(lib, q) ? 1 : 0;
  }
  return {agree == 3 && exact == kCases,
          detail + fmt::format("{}/3 seeds agree; selection equals brute force on {}/{} cases", agree, exact, kCases)};
}

Outcome identity_preservation() {
  int agree = 0;
  std::string detail;
  for (std::size_t k = 0; k < desk_study().seeds.size(); ++k) {
    const auto& id = desk_study().seeds[k].identity;
    agree += id.median_same > id.cross_p95 ? 1 : 0;
    detail += fmt::format("seed {}: same-character median {:.4f} vs cross p95 {:.4f} ({:.0f}% above); ", k + 1,
                          id.median_same, id.cross_p95, 100.0 * id.share_above);
  }
  return {agree == 3, detail + fmt::format("{}/3 seeds", agree)};
}

// --- 7 ----------------------------------------------------------------------

Outcome eer_oracle() {
  constexpr int kCases = 500;
  Rng rng(7);
  int exact = 0;
  for (int trial = 0; trial < kCases; ++trial) {
    const std::size_t ng = 1 + rng.below(40), ni = 1 + rng.below(40);
    const bool discrete = trial % 2 == 0;
    std::vector<double> gs(ng), is(ni);
    for (auto& v : gs) v = discrete ? static_cast<double>(rng.below(6)) / 5.0 : rng.normal(0.5, 1.0);
    for (auto& v : is) v = discrete ? static_cast<double>(rng.below(6)) / 5.0 : rng.normal(0.0, 1.0);
    const auto got = metrics::compute_eer(gs, is);
    const auto want = testing::brute_force_eer(gs, is);
    exact += got.eer == want.eer && got.threshold == want.threshold ? 1 : 0;
  }
  const double separated = metrics::compute_eer(std::vector<double>{0.8, 0.9, 0.95}, std::vector<double>{0.1, 0.3}).eer;
  const double hand = metrics::compute_eer(std::vector<double>{0.9, 0.7}, std::vector<double>{0.8, 0.2}).eer;
  return {exact == kCases && separated == 0.0 && std::abs(hand - 0.5) < 1e-12,
          fmt::format("{}/{} equal the sweep oracle; separated {}, hand case {}", exact, kCases, separated, hand)};
}

// --- 8 ----------------------------------------------------------------------

Outcome retrieval_criterion() {
  const auto st = experiment::run_retrieval_study({}, 1);
  Rng rng(8);
  int exact = 0;
  constexpr int kCases = 1000;
  for (int trial = 0; trial < kCases; ++trial) {
    std::vector<bool> r(1 + rng.below(40));
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.bernoulli(0.2);
    r[rng.below(r.size())] = true;
    const auto o = testing::naive_rank_metrics(r, static_cast<std::size_t>(std::count(r.begin(), r.end(), true)));
    const auto s = retrieval::score_rankings({r});
    exact += s.map == o.ap && s.mrr == o.rr && s.r1 == (o.hit1 ? 1.0 : 0.0) &&
                     s.r5 == (o.hit5 ? 1.0 : 0.0) && s.r10 == (o.hit10 ? 1.0 : 0.0)
                 ? 1
                 : 0;
  }
  const double gap = st.alignment.diagonal_mean() - st.alignment.off_diagonal_mean();
  const bool ok = st.trained.map > 3.0 * st.random_baseline &&
                  std::abs(st.untrained_map - st.random_baseline) <= 0.1 && exact == kCases && gap >= 0.1;
  return {ok, fmt::format("mAP {:.4f} vs baseline {:.4f} (untrained {:.4f}); R@1 {:.3f} MRR {:.3f}; "
                          "alignment gap {:.4f}; {}/{} rankings equal the oracle",
                          st.trained.map, st.random_baseline, st.untrained_map, st.trained.r1, st.trained.mrr, gap,
                          exact, kCases)};
}

// --- 9 ----------------------------------------------------------------------

Outcome quantization() {
  Rng rng(9);
  std::vector<std::vector<double>> data(40, std::vector<double>(256));
  for (auto& row : data)
    for (double& x : row) x = rng.normal(0.0, 0.07);
  std::vector<double> mse;
  bool monotone = true;
  for (std::size_t levels : {8u, 32u, 128u, 512u}) {
    mse.push_back(timbre::quantization_mse(data, timbre::fit_codebook(data, levels, 1)));
    if (mse.size() > 1) monotone = monotone && mse.back() <= mse[mse.size() - 2];
  }
  const auto cb = timbre::fit_codebook(data, timbre::kCodebookLevels, 2);
  int scan_ok = 0;
  constexpr int kVectors = 10000;
  for (int i = 0; i < kVectors; ++i) {
    std::vector<double> v(8);
    for (double& x : v) x = i % 10 == 0 ? cb.levels[rng.below(cb.levels.size())] : rng.normal(0.0, 0.1);
    const auto code = timbre::quantize(v, cb);
    bool same = true;
    for (std::size_t d = 0; d < v.size(); ++d) {
      std::size_t best = 0;
      for (std::size_t l = 1; l < cb.levels.size(); ++l)
        if (std::abs(v[d] - cb.levels[l]) < std::abs(v[d] - cb.levels[best])) best = l;
      same = same && code.indices[d] == best;
    }
    scan_ok += same ? 1 : 0;
  }
  bool idempotent = true;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(256);
    for (double& x : v) x = rng.normal(0.0, 0.1);
    const auto once = timbre::quantize(v, cb).quantized;
    idempotent = idempotent && timbre::quantize(once, cb).quantized == once;
  }
  return {monotone && idempotent && scan_ok == kVectors,
          fmt::format("MSE at 8/32/128/512 levels {:.2e} {:.2e} {:.2e} {:.2e}; idempotent {}; linear scan {}/{}",
                      mse[0], mse[1], mse[2], mse[3], idempotent, scan_ok, kVectors)};
}

// --- 10 ---------------------------------------------------------------------

double toy_error(int steps, double* mean_out = nullptr) {
  const double mu = 3.0, sigma = 0.1;
  const flow::VelocityFn v = [&](const std::vector<double>& x, double t, bool) {
    return std::vector<double>{flow::gaussian_oracle_velocity(x[0], t, mu, sigma)};
  };
  double err = 0.0, mean = 0.0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) {
    const std::uint64_t seed = Rng::derive(10, "toy-" + std::to_string(i));
    const double x = flow::euler_sample(v, 1, steps, 1.0, seed)[0];
    err += std::abs(x - (mu + sigma * flow::initial_noise(1, seed)[0]));
    mean += x;
  }
  if (mean_out != nullptr) *mean_out = mean / draws;
  return err / draws;
}

Outcome flow_transport() {
  double mean = 0.0;
  std::vector<double> errs{toy_error(8, &mean)};
  bool monotone = true;
  for (int steps : {16, 32, 64}) {
    errs.push_back(toy_error(steps));
    monotone = monotone && errs.back() <= errs[errs.size() - 2] + 0.05;
  }
  return {std::abs(mean - 3.0) <= 0.2 && monotone,
          fmt::format("8-step mean {:.4f}; error at 8/16/32/64 steps {:.4f} {:.4f} {:.4f} {:.4f}", mean, errs[0],
                      errs[1], errs[2], errs[3])};
}

// --- 12 and 13 drive the CLI ------------------------------------------------

int run(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kSmallConfig = R"({"seed": 7,
 "corpus": {"num_characters": 8, "utterances_per_character": 20},
 "system": {"adapter": {"epochs": 3}, "flow": {"epochs": 10}, "timbre": {"epochs": 5},
            "projection": {"epochs": 5}},
 "encoder_epochs": 5})";

Outcome determinism(const std::string& cli, const fs::path& work) {
  const auto cfg = work / "config.json";
  corpus::write_text_file(cfg.string(), kSmallConfig);
  const std::vector<std::string> files{"report.json", "metrics.csv", "per_emotion_all.csv", "per_emotion_seen.csv",
                                       "per_emotion_unseen.csv"};
  std::vector<std::vector<std::string>> outputs;
  for (const char* tag : {"a", "b"}) {
    const auto dir = work / tag;
    const std::string q = " --quiet";
    if (run(cli + " gen-data --config " + cfg.string() + " --out " + (dir / "data").string() + q) != 0 ||
        run(cli + " train --config " + cfg.string() + " --data " + (dir / "data").string() + " --out " +
            (dir / "models").string() + q) != 0 ||
        run(cli + " eval --config " + cfg.string() + " --data " + (dir / "data").string() + " --models " +
            (dir / "models").string() + " --out " + (dir / "eval").string() + q) != 0)
      return {false, "a CLI step exited non-zero"};
    std::vector<std::string> got;
    for (const auto& f : files) got.push_back(slurp(dir / "eval" / f));
    outputs.push_back(got);
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < files.size(); ++i)
    same += !outputs[0][i].empty() && outputs[0][i] == outputs[1][i] ? 1 : 0;
  return {same == files.size(),
          fmt::format("{}/{} report files byte-identical across two gen-data/train/eval runs", same, files.size())};
}

corpus::Corpus leak_unseen(corpus::Corpus c) {
  for (auto& u : c.utterances)
    if (!u.seen) {
      u.split = corpus::Split::kTrain;
      break;
    }
  return c;
}

template <typename F>
bool throws_leakage(F&& f) {
  try {
    f();
  } catch (const LeakageError&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

Outcome leakage_guards(const std::string& cli, const fs::path& work) {
  std::vector<std::pair<std::string, bool>> checks;

  // CLI: move one unseen test utterance into the train split on disk.
  const auto data = work / "a" / "data";
  const auto leak_dir = work / "leak";
  fs::create_directories(leak_dir);
  fs::copy_file(data / "personas.json", leak_dir / "personas.json", fs::copy_options::overwrite_existing);
  std::istringstream in(slurp(data / "corpus.jsonl"));
  std::string out, line;
  bool moved = false;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    if (!moved && j.value("kind", "") != "header" && j.contains("seen") && !j["seen"].get<bool>()) {
      j["split"] = "train";
      moved = true;
    }
    out += j.dump() + "\n";
  }
  corpus::write_text_file((leak_dir / "corpus.jsonl").string(), out);
  const int code = run(cli + " train --config " + (work / "config.json").string() + " --data " + leak_dir.string() +
                       " --out " + (work / "leak_models").string() + " --quiet");
  checks.emplace_back(fmt::format("cli train exit {}", code), moved && code == 4);

  corpus::CorpusParams p;
  p.num_characters = 5;
  p.utterances_per_character = 10;
  p.seed = 13;
  const auto clean = corpus::generate_corpus(p);
  const auto leaky = leak_unseen(clean);

  adapter::AdapterConfig ac;
  ac.num_layers = 1;
  ac.hidden_dim = 8;
  ac.num_heads = 2;
  ac.z_dim = 4;
  ac.desc_buckets = 16;
  ac.epochs = 1;
  const adapter::Adapter small(ac, 1);
  flow::FlowConfig fc;
  fc.hidden = 8;
  fc.fine_dim = 4;
  fc.epochs = 1;
  auto tc = timbre::default_timbre_config();
  tc.epochs = 1;
  const auto tim = timbre::train_timbre_encoder(clean, 1, tc);
  std::vector<corpus::Contour> cs;
  for (std::size_t i : clean.select(corpus::Split::kTrain, true)) cs.push_back(clean.contours[i]);
  const auto cb = timbre::fit_codebook(tim.utterance_embeddings(cs), 16, 1);
  retrieval::ProjectionConfig pc;
  pc.epochs = 1;

  checks.emplace_back("adapter", throws_leakage([&] { adapter::train_adapter(leaky, ac, 1); }));
  checks.emplace_back("flow", throws_leakage([&] { flow::train_flow(leaky, small, fc, 1); }));
  checks.emplace_back("timbre", throws_leakage([&] { timbre::train_timbre_encoder(leaky, 1, tc); }));
  checks.emplace_back("projection", throws_leakage([&] { retrieval::train_projection(leaky, small, tim, cb, pc, 1); }));
  checks.emplace_back("eval encoders", throws_leakage([&] { metrics::train_eval_encoders(clean, clean, 1); }));

  bool all = true;
  std::string detail;
  for (const auto& [name, ok] : checks) {
    all = all && ok;
    detail += fmt::format("{} {}; ", name, ok ? "aborted" : "NOT aborted");
  }
  return {all, detail + "leakage exit code 4"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <duotrack-cli>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = fs::temp_directory_path() / "duotrack_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"loss formula oracles", loss_oracles},
      {"training effectiveness", training_effectiveness},
      {"contrastive direction", contrastive_direction},
      {"teacher direction", teacher_direction},
      {"reference selection direction", reference_direction},
      {"EER oracle", eer_oracle},
      {"retrieval", retrieval_criterion},
      {"quantization", quantization},
      {"flow transport", flow_transport},
      {"identity preservation", identity_preservation},
      {"determinism", [&] { return determinism(cli, work); }},
      {"leakage guards", [&] { return leakage_guards(cli, work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, fn] = criteria[i];
    log_info(fmt::format("criterion {}: {}", i + 1, name));
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << fmt::format("{} [{:>2}] {}: {}", o.pass ? "PASS" : "FAIL", i + 1, name, o.detail) << std::endl;
  }
  std::cout << fmt::format("{}/{} criteria passed", criteria.size() - failed, criteria.size()) << std::endl;
  fs::remove_all(work);
  return failed == 0 ? 0 : 1;
}
