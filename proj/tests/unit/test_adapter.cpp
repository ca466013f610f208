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

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "duotrack/adapter/adapter.hpp"
#include "duotrack/adapter/train.hpp"
#include "duotrack/core/errors.hpp"
#include "duotrack/core/rng.hpp"
#include "duotrack/corpus/generate.hpp"
#include "duotrack/numkernel/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace duotrack;
using namespace duotrack::adapter;

namespace {

AdapterConfig tiny_config() {
  AdapterConfig c;
  c.num_layers = 2;
  c.hidden_dim = 8;
  c.num_heads = 2;
  c.rationale_dim = 16;
  c.z_dim = 6;
  c.desc_buckets = 32;
  c.epochs = 3;
  c.batch = 8;
  return c;
}

corpus::Corpus small_corpus() {
  corpus::CorpusParams p;
  p.num_characters = 4;
  p.utterances_per_character = 20;
  p.seed = 11;
  return corpus::generate_corpus(p);
}

// Targets with the rationale cut down to `dim` entries.
std::vector<corpus::ProsodyTarget> truncated_targets(const corpus::Corpus& c, std::size_t dim) {
  auto t = c.targets;
  for (auto& x : t) x.rationale.resize(dim);
  return t;
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, scale);
  return v;
}

}  // namespace

TEST_CASE("control signals from predicted prosody") {
  auto c = control_from_phat({1.0, 0.5, 0.5, 0.0, 0.0});
  CHECK(c.duration_scale == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.pause_scale == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.delta_f0 == 0.0);
  CHECK(c.delta_e == 0.0);
  c = control_from_phat({0.5, 1.0, 0.5, 0.2, -0.1});
  CHECK(c.duration_scale == doctest::Approx(1.0 / 1.4).epsilon(1e-15));
  CHECK(c.delta_f0 == 0.2);
  CHECK(c.delta_e == -0.1);
  c = control_from_phat({0.0, 0.0, 0.0, 0.0, 0.0});
  CHECK(c.duration_scale == doctest::Approx(1.0 / 0.6));
  CHECK(c.pause_scale == doctest::Approx(1.5));
  for (double a = 0.0; a <= 1.0; a += 0.05) {
    for (double v = 0.0; v <= 1.0; v += 0.05) {
      const auto k = control_from_phat({v, a, 0.5, 0.0, 0.0});
      CHECK(k.duration_scale >= 0.5);
      CHECK(k.duration_scale <= 2.0);
      CHECK(k.pause_scale >= 0.0);
      CHECK(k.pause_scale <= 2.0);
    }
  }
}

TEST_CASE("distillation loss values") {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.0, 0.1};
  const std::vector<double> h{0.5, -0.5, 1.0};
  CHECK(distill_loss_value(p, p, h, h, 0.5) == 0.0);
  const std::vector<double> q{0.4, 0.6, 0.3, 0.0, 0.1};
  CHECK(distill_loss_value(q, p, h, h, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(distill_loss_value(q, p, h, h, 0.5, true) == doctest::Approx(0.25).epsilon(1e-15));

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_vec(rng, 5), b = random_vec(rng, 5);
    const auto ha = random_vec(rng, 768), hb = random_vec(rng, 768);
    const double lam = rng.uniform(0.0, 2.0);
    CHECK(std::abs(distill_loss_value(a, b, ha, hb, lam) - testing::plain_distill_loss(a, b, ha, hb, lam)) <
          1e-10);
  }
}

TEST_CASE("distillation loss averages over the batch") {
  nk::Tape tape;
  const auto P = tape.constant(nk::Tensor::matrix(2, 2, {0.3, 0.4, 0.0, 0.0}));
  const auto T = tape.constant(nk::Tensor::matrix(2, 2, {0.0, 0.0, 0.0, 1.0}));
  const auto H = tape.constant(nk::Tensor::matrix(2, 1, {1.0, 0.0}));
  const auto R = tape.constant(nk::Tensor::matrix(2, 1, {1.0, 2.0}));
  CHECK(distill_loss(P, T, H, R, 0.5).value().item() == doctest::Approx((0.5 + 1.0 + 1.0) / 2.0));
}

TEST_CASE("semantic weight zero removes the semantic gradient") {
  nk::Tape tape;
  const auto P = tape.leaf(nk::Tensor::matrix(1, 5, {0.1, 0.2, 0.3, 0.4, 0.5}));
  const auto T = tape.constant(nk::Tensor::matrix(1, 5, {0.2, 0.2, 0.2, 0.2, 0.2}));
  const auto H = tape.leaf(nk::Tensor::matrix(1, 3, {1.0, 2.0, 3.0}));
  const auto R = tape.constant(nk::Tensor::matrix(1, 3, {0.0, 0.0, 0.0}));
  const auto g = tape.backward(distill_loss(P, T, H, R, 0.0));
  for (double v : g.of(H).data()) CHECK(v == 0.0);
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4, 0.5}, t{0.2, 0.2, 0.2, 0.2, 0.2};
  std::vector<double> h{1.0, 2.0, 3.0}, r{0.0, 0.0, 0.0};
  const double base = distill_loss_value(p, t, h, r, 0.0);
  h[1] += 1e-3;
  CHECK(distill_loss_value(p, t, h, r, 0.0) == base);
}

TEST_CASE("contrastive loss values") {
  const std::vector<double> zi{1.0, 0.0, 0.0};
  CHECK(contrastive_loss_value(zi, zi, {{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}, 1.0) ==
        doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 2.0))).epsilon(1e-14));
  CHECK(contrastive_loss_value(zi, zi, {{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}, 1.0) ==
        doctest::Approx(0.5514).epsilon(1e-4));
  // All similarities equal: k candidates give ln k.
  const std::vector<double> u{0.0, 1.0, 0.0, 0.0};
  const std::vector<std::vector<double>> negs{{0.0, 0.0, 1.0, 0.0}, {0.0, 0.0, 0.0, 1.0},
                                              {0.0, 0.0, -1.0, 0.0}};
  CHECK(contrastive_loss_value(std::vector<double>{1.0, 0.0, 0.0, 0.0}, u, negs, 0.3) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(contrastive_loss_value(zi, std::vector<double>{0.9, 0.1, 0.0}, {{0.0, 1.0, 0.0}, {-1.0, 0.2, 0.0}}, 0.01) <
        1e-12);
  CHECK_THROWS_AS(contrastive_loss_value(zi, std::vector<double>{0.0, 0.0, 0.0}, {{0.0, 1.0, 0.0}}, 1.0),
                  DomainError);
  CHECK_THROWS_AS(contrastive_loss_value(std::vector<double>{0.0, 0.0, 0.0}, zi, {{0.0, 1.0, 0.0}}, 1.0),
                  DomainError);
  CHECK_THROWS_AS(contrastive_loss_value(zi, zi, {{0.0, 0.0, 0.0}}, 1.0), DomainError);
  CHECK_THROWS_AS(contrastive_loss_value(zi, zi, {}, 1.0), DomainError);
}

TEST_CASE("contrastive loss matches the formula and is scale invariant") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.below(12);
    const auto zi = random_vec(rng, d), zp = random_vec(rng, d);
    std::vector<std::vector<double>> negs(1 + rng.below(6));
    for (auto& n : negs) n = random_vec(rng, d);
    const double tau = rng.uniform(0.05, 2.0);
    const double lib = contrastive_loss_value(zi, zp, negs, tau);
    CHECK(std::abs(lib - testing::plain_contrastive_loss(zi, zp, negs, tau)) < 1e-10);

    const double s = rng.uniform(0.01, 100.0);
    auto scaled = [s](std::vector<double> v) {
      for (auto& x : v) x *= s;
      return v;
    };
    auto negs_s = negs;
    for (auto& n : negs_s) n = scaled(n);
    CHECK(std::abs(contrastive_loss_value(scaled(zi), scaled(zp), negs_s, tau) - lib) < 1e-10);
  }
}

TEST_CASE("config validation") {
  AdapterConfig c;
  CHECK_NOTHROW(c.check());
  c.num_heads = 3;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = {};
  c.tau = 0.0;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = {};
  c.lambda_con = -0.1;
  CHECK_THROWS_AS(c.check(), ConfigError);
  const auto ref = reference_scale_config();
  CHECK(ref.num_layers == 4);
  CHECK(ref.hidden_dim == 512);
  CHECK(ref.num_heads == 8);
  CHECK(ref.lambda_sem == 0.5);
  CHECK(ref.lambda_con == 0.3);
  CHECK(ref.tau == 0.07);
  CHECK(ref.lr == 1e-4);
  CHECK(ref.epochs == 100);
  CHECK(adapter_config_from_json(to_json(ref)).hidden_dim == 512);
}

TEST_CASE("description hashing") {
  const auto a = description_buckets("A bright, Fast voice", 1000);
  const auto b = description_buckets("a BRIGHT fast voice", 1000);
  CHECK(a == b);
  CHECK(a.size() == 4);
  CHECK_THROWS_AS(description_buckets(" ,; ", 10), DomainError);
  CHECK(volatility_bucket(0.0) == 0);
  CHECK(volatility_bucket(0.3) == 1);
  CHECK(volatility_bucket(1.0) == 3);
}

TEST_CASE("forward pass contracts") {
  const auto corpus = small_corpus();
  Adapter model(tiny_config(), 9);
  const auto& u = corpus.utterances[0];
  const auto& persona = corpus.persona(u.character_id);

  SUBCASE("zero weights give the midpoint for every input") {
    Adapter zero = model;
    zero.params().zero();
    for (std::size_t i = 0; i < corpus.utterances.size(); i += 7) {
      const auto& ui = corpus.utterances[i];
      const auto out = zero.run(corpus.persona(ui.character_id), ui.token_ids);
      CHECK(out.p_hat[0] == 0.5);
      CHECK(out.p_hat[1] == 0.5);
      CHECK(out.p_hat[2] == 0.5);
      CHECK(out.p_hat[3] == 0.0);
      CHECK(out.p_hat[4] == 0.0);
    }
  }

  SUBCASE("padding placement does not matter") {
    const auto base = model.run(persona, u.token_ids);
    std::vector<int> padded = u.token_ids;
    padded.insert(padded.begin() + 1, {0, 0});
    padded.push_back(0);
    padded.insert(padded.begin(), 0);
    const auto out = model.run(persona, padded);
    CHECK(out.p_hat == base.p_hat);
    CHECK(out.z == base.z);
    CHECK(out.h_adapter == base.h_adapter);
  }

  SUBCASE("outputs respect their domains") {
    for (std::size_t i = 0; i < corpus.utterances.size(); i += 3) {
      const auto& ui = corpus.utterances[i];
      const auto out = model.run(corpus.persona(ui.character_id), ui.token_ids);
      for (std::size_t k = 0; k < 3; ++k) CHECK((out.p_hat[k] >= 0.0 && out.p_hat[k] <= 1.0));
      for (std::size_t k = 3; k < 5; ++k) CHECK((out.p_hat[k] >= -1.0 && out.p_hat[k] <= 1.0));
      CHECK(out.h_adapter.size() == 16);
      CHECK(out.z.size() == 6);
      for (double z : out.z) CHECK(std::isfinite(z));
    }
  }

  SUBCASE("bad tokens") {
    CHECK_THROWS_AS(model.run(persona, std::vector<int>{1, 2, 999}), DomainError);
    CHECK_THROWS_AS(model.run(persona, std::vector<int>{1, -1}), DomainError);
    CHECK_THROWS_AS(model.run(persona, std::vector<int>{0, 0}), DomainError);
  }

  SUBCASE("checkpoint round trip") {
    const auto ck = nk::decode_checkpoint(nk::encode_checkpoint(model.to_checkpoint()));
    const Adapter back = Adapter::from_checkpoint(ck);
    CHECK(back.run(persona, u.token_ids).z == model.run(persona, u.token_ids).z);
    nk::Checkpoint wrong = ck;
    wrong.meta = R"({"kind":"timbre-encoder"})";
    CHECK_THROWS_AS(Adapter::from_checkpoint(wrong), DataError);
  }

  SUBCASE("description encoding") {
    const auto e = model.encode_description(persona.description);
    CHECK(e.size() == 8);
    CHECK(e != model.encode_description(corpus.personas[1].description));
  }
}

TEST_CASE("gradients of the total loss match finite differences") {
  const auto corpus = small_corpus();
  const auto targets = truncated_targets(corpus, 16);
  Adapter model(tiny_config(), 21);
  Rng rng(4);
  AnchorMap anchors;
  for (const auto& p : corpus.personas) anchors[p.character_id] = random_vec(rng, 6);

  const auto train = corpus.select(corpus::Split::kTrain, true);
  std::vector<BatchExample> batch;
  for (int k = 0; k < 5; ++k) {
    const std::size_t i = train[rng.below(train.size())];
    const auto& u = corpus.utterances[i];
    batch.push_back({&corpus.persona(u.character_id), &u, &targets[i]});
  }
  nk::Tape tape;
  nk::Bound p(tape, model.params());
  const auto bl = batch_loss(tape, p, model, batch, anchors);
  CHECK(bl.contrast > 0.0);
  CHECK(bl.total.value().item() ==
        doctest::Approx(bl.distill + 0.3 * bl.contrast).epsilon(1e-12));
  const auto analytic = p.gradients(tape.backward(bl.total));
  auto loss = [&] {
    nk::Tape t;
    nk::Bound q(t, model.params(), false);
    return batch_loss(t, q, model, batch, anchors).total.value().item();
  };
  const auto r = testing::check_gradients(model.params(), analytic, loss, 1e-6, 1e-4, 1e-3, 3);
  std::printf("adapter gradcheck: %zu coords, %.4f within 1e-4, worst %.2e\n", r.checked,
              r.tight_fraction(), r.worst);
  CHECK(r.tight_fraction() >= 0.95);
}

TEST_CASE("training") {
  const auto corpus = small_corpus();
  const auto targets = truncated_targets(corpus, 16);
  const auto cfg = tiny_config();

  const auto run = train_adapter(corpus, cfg, 5, {}, &targets);
  REQUIRE(run.log.size() == 4);
  CHECK(run.log.back().val_mse < run.log.front().val_mse);
  for (const auto& row : run.log)
    CHECK(std::abs(row.total - (row.distill + cfg.lambda_con * row.contrast)) <= 1e-12);
  CHECK(run.anchors.size() == corpus.character_ids(true).size());

  SUBCASE("deterministic") {
    const auto again = train_adapter(corpus, cfg, 5, {}, &targets);
    for (std::size_t i = 0; i < run.model.params().size(); ++i)
      CHECK(again.model.params().entries()[i].value == run.model.params().entries()[i].value);
    CHECK(training_log_csv(again.log) == training_log_csv(run.log));
  }

  SUBCASE("resume reproduces the uninterrupted run") {
    const auto path = (std::filesystem::temp_directory_path() / "duotrack_adapter_state.dtck").string();
    std::filesystem::remove(path);
    TrainOptions first;
    first.state_path = path;
    first.stop_after_epoch = 1;
    const auto partial = train_adapter(corpus, cfg, 5, first, &targets);
    CHECK(partial.log.size() == 2);
    TrainOptions second;
    second.state_path = path;
    second.resume = true;
    const auto resumed = train_adapter(corpus, cfg, 5, second, &targets);
    for (std::size_t i = 0; i < run.model.params().size(); ++i)
      CHECK(resumed.model.params().entries()[i].value == run.model.params().entries()[i].value);
    CHECK(training_log_csv(resumed.log) == training_log_csv(run.log));
    CHECK_THROWS_AS(train_adapter(corpus, cfg, 6, second, &targets), ConfigError);
    std::filesystem::remove(path);
  }

  SUBCASE("no contrastive term when its weight is zero") {
    auto c0 = cfg;
    c0.lambda_con = 0.0;
    const auto r0 = train_adapter(corpus, c0, 5, {}, &targets);
    for (const auto& row : r0.log) {
      CHECK(row.contrast == 0.0);
      CHECK(row.total == row.distill);
    }
  }

  SUBCASE("z differs across utterances of one persona") {
    const auto ids = corpus.by_character(corpus.personas[0].character_id);
    const auto& persona = corpus.personas[0];
    const auto a = run.model.run(persona, corpus.utterances[ids[0]].token_ids).z;
    const auto b = run.model.run(persona, corpus.utterances[ids[1]].token_ids).z;
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
    CHECK(d > 0.0);
  }

  SUBCASE("log csv") {
    const auto csv = training_log_csv(run.log);
    CHECK(csv.rfind("epoch,distill,semantic,contrast,total,val_mse\n", 0) == 0);
  }
}

TEST_CASE("training guards") {
  auto corpus = small_corpus();
  const auto targets = truncated_targets(corpus, 16);
  SUBCASE("unseen character in the train split") {
    for (auto& u : corpus.utterances) {
      if (!u.seen) {
        u.split = corpus::Split::kTrain;
        break;
      }
    }
    CHECK_THROWS_AS(train_adapter(corpus, tiny_config(), 1, {}, &targets), LeakageError);
  }
  SUBCASE("single character") {
    corpus::Corpus one = corpus;
    one.personas.resize(1);
    CHECK_THROWS_AS(train_adapter(one, tiny_config(), 1, {}, &targets), ConfigError);
  }
}
