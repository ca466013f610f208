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
#include <numbers>

#include "doctest.h"
#include "duotrack/adapter/train.hpp"
#include "duotrack/core/errors.hpp"
#include "duotrack/core/rng.hpp"
#include "duotrack/corpus/generate.hpp"
#include "duotrack/corpus/teacher.hpp"
#include "duotrack/corpus/vocab.hpp"
#include "duotrack/prosodyflow/flow.hpp"
#include "duotrack/prosodyflow/hierarchical.hpp"
#include "support/flow_oracle.hpp"
#include "support/gradcheck.hpp"

using namespace duotrack;
using namespace duotrack::flow;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double s = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = s * rng.normal();
  return v;
}

// Toy transport N(0,1) -> N(mu, sigma^2); the exact flow map is x0 -> mu + sigma x0.
double toy_error(int steps, double* mean_out = nullptr) {
  const double mu = 3.0, sigma = 0.1;
  const VelocityFn v = [&](const std::vector<double>& x, double t, bool) {
    return std::vector<double>{gaussian_oracle_velocity(x[0], t, mu, sigma)};
  };
  double err = 0.0, mean = 0.0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) {
    const std::uint64_t seed = Rng::derive(5, "toy-" + std::to_string(i));
    const double x = euler_sample(v, 1, steps, 1.0, seed)[0];
    const double x0 = initial_noise(1, seed)[0];
    err += std::abs(x - (mu + sigma * x0));
    mean += x;
  }
  if (mean_out != nullptr) *mean_out = mean / draws;
  return err / draws;
}

adapter::AdapterConfig tiny_adapter() {
  adapter::AdapterConfig c;
  c.num_layers = 1;
  c.hidden_dim = 16;
  c.num_heads = 2;
  c.z_dim = 8;
  c.desc_buckets = 32;
  c.epochs = 4;
  c.batch = 16;
  return c;
}

FlowConfig tiny_flow() {
  FlowConfig c;
  c.hidden = 32;
  c.fine_dim = 8;
  c.epochs = 40;
  c.batch = 32;
  return c;
}

struct Fixture {
  corpus::Corpus corpus;
  adapter::Adapter model;
  TrainedFlow trained;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    corpus::CorpusParams p;
    p.num_characters = 5;
    p.utterances_per_character = 40;
    p.seed = 19;
    Fixture x;
    x.corpus = corpus::generate_corpus(p);
    x.model = adapter::train_adapter(x.corpus, tiny_adapter(), 3).model;
    x.trained = train_flow(x.corpus, x.model, tiny_flow(), 4);
    return x;
  }();
  return f;
}

}  // namespace

TEST_CASE("time features") {
  const double ts[] = {0.0, 0.25};
  const auto f = time_features(ts);
  CHECK(f.rows() == 2);
  CHECK(f.cols() == kTimeFeatures);
  CHECK(f(0, 0) == 0.0);
  CHECK(f(0, 2) == doctest::Approx(1.0));  // cos(0)
  CHECK(f(1, 1) == doctest::Approx(1.0));  // sin(pi/2)
  CHECK(f(1, 3) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("euler sampler on the Gaussian toy") {
  double mean = 0.0;
  const double e8 = toy_error(8, &mean);
  CHECK(std::abs(mean - 3.0) <= 0.2);
  const double e16 = toy_error(16), e32 = toy_error(32), e64 = toy_error(64);
  std::printf("toy transport error 8/16/32/64 steps: %.4f %.4f %.4f %.4f\n", e8, e16, e32, e64);
  CHECK(e16 <= e8 + 0.05);
  CHECK(e32 <= e16 + 0.05);
  CHECK(e64 <= e32 + 0.05);
  CHECK(e64 < e8);
}

TEST_CASE("oracle velocity matches a Monte Carlo conditional mean") {
  // E[x1 - x0 | x_t near x] estimated from paired draws.
  Rng rng(3);
  const double mu = 1.5, sigma = 0.5, t = 0.4, x = 0.9;
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < 2000000; ++i) {
    const double x0 = rng.normal(), x1 = mu + sigma * rng.normal();
    const double xt = (1 - t) * x0 + t * x1;
    if (std::abs(xt - x) < 0.01) {
      sum += x1 - x0;
      ++n;
    }
  }
  REQUIRE(n > 1000);
  CHECK(sum / n == doctest::Approx(gaussian_oracle_velocity(x, t, mu, sigma)).epsilon(0.03));
}

TEST_CASE("sampler identities") {
  SUBCASE("zero field returns the starting noise") {
    const VelocityFn zero = [](const std::vector<double>& x, double, bool) {
      return std::vector<double>(x.size(), 0.0);
    };
    CHECK(euler_sample(zero, 4, 8, 2.0, 77) == initial_noise(4, 77));
  }
  SUBCASE("guidance scale 1 and 0 use one branch only") {
    int cond_calls = 0, null_calls = 0;
    const VelocityFn v = [&](const std::vector<double>& x, double, bool conditional) {
      (conditional ? cond_calls : null_calls)++;
      return std::vector<double>(x.size(), conditional ? 1.0 : -1.0);
    };
    const auto a = euler_sample(v, 2, 8, 1.0, 1);
    CHECK(null_calls == 0);
    CHECK(cond_calls == 8);
    const auto x0 = initial_noise(2, 1);
    CHECK(a[0] == doctest::Approx(x0[0] + 1.0));
    cond_calls = 0;
    const auto b = euler_sample(v, 2, 8, 0.0, 1);
    CHECK(cond_calls == 0);
    CHECK(b[1] == doctest::Approx(x0[1] - 1.0));
  }
  SUBCASE("guided field is null + s (cond - null)") {
    const VelocityFn v = [](const std::vector<double>& x, double, bool conditional) {
      return std::vector<double>(x.size(), conditional ? 0.5 : 0.25);
    };
    const auto x = euler_sample(v, 1, 4, 2.0, 9);
    CHECK(x[0] == doctest::Approx(initial_noise(1, 9)[0] + 0.25 + 2.0 * 0.25));
  }
  SUBCASE("bounds clamp the result") {
    const VelocityFn v = [](const std::vector<double>& x, double, bool) {
      return std::vector<double>(x.size(), 100.0);
    };
    const double lo[] = {-1.0}, hi[] = {1.0};
    CHECK(euler_sample(v, 1, 2, 1.0, 3, lo, hi)[0] == 1.0);
  }
  SUBCASE("steps below one") {
    const VelocityFn v = [](const std::vector<double>& x, double, bool) { return x; };
    CHECK_THROWS_AS(euler_sample(v, 1, 0, 1.0, 3), ConfigError);
  }
}

TEST_CASE("flow matching loss matches the plain formula") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t xd = 1 + rng.below(6), cd = 1 + rng.below(5), hidden = 4 + rng.below(6);
    const std::size_t blocks = rng.below(3);
    VelocityNet net(xd, cd, hidden, blocks, 100 + trial);
    // Perturb gains and biases so every parameter matters.
    for (auto& e : net.params().entries())
      for (double& v : e.value.data()) v += 0.1 * rng.normal();
    const auto x1 = random_vec(rng, xd);
    const auto c = random_vec(rng, cd);
    const double drop = trial % 3 == 0 ? 1.0 : (trial % 3 == 1 ? 0.0 : 0.5);
    const std::uint64_t s = rng.next_u64();
    Rng a(s), b(s);
    const double got = cfm_train_loss_value(net, x1, c, drop, a);
    const double want = testing::plain_cfm_loss(net.params(), blocks, x1, c, drop, b);
    CHECK(std::abs(got - want) <= 1e-10 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("velocity network gradients match finite differences") {
  Rng rng(8);
  VelocityNet net(3, 4, 6, 2, 31);
  const std::size_t rows = 5;
  nk::Tensor x1 = nk::Tensor::zeros({rows, 3}), x0 = x1, c = nk::Tensor::zeros({rows, 4});
  for (double& v : x1.data()) v = rng.normal();
  for (double& v : x0.data()) v = rng.normal();
  for (double& v : c.data()) v = rng.normal();
  std::vector<double> t(rows);
  for (double& v : t) v = rng.uniform();
  const std::vector<bool> dropped{false, true, false, false, true};

  nk::Tape tape;
  nk::Bound p(tape, net.params());
  const auto loss = cfm_loss_at(p, net, x1, x0, t, c, dropped);
  const auto analytic = p.gradients(tape.backward(loss));
  auto value = [&] {
    nk::Tape tp;
    nk::Bound q(tp, net.params(), false);
    return cfm_loss_at(q, net, x1, x0, t, c, dropped).value().item();
  };
  const auto r = testing::check_gradients(net.params(), analytic, value);
  std::printf("velocity gradcheck: %zu coords, %.4f within 1e-4, worst %.2e\n", r.checked,
              r.tight_fraction(), r.worst);
  CHECK(r.tight_fraction() >= 0.95);
}

TEST_CASE("fine targets and conditions") {
  corpus::Contour flat;
  flat.durations = {2, 2};
  flat.pauses = {0, 0};
  flat.f0.assign(4, 200.0);
  flat.energy.assign(4, 0.5);
  for (double v : fine_target(flat, 2, 20.0)) CHECK(v == 0.0);

  corpus::Contour ramp = flat;
  ramp.f0 = {190.0, 190.0, 210.0, 210.0};
  ramp.energy = {0.45, 0.45, 0.55, 0.55};
  const auto f = fine_target(ramp, 2, 20.0);
  REQUIRE(f.size() == 4);
  CHECK(f[0] == doctest::Approx(-0.5));
  CHECK(f[1] == doctest::Approx(0.5));
  CHECK(f[2] == doctest::Approx(-0.5));
  CHECK(f[3] == doctest::Approx(0.5));
  CHECK_THROWS_AS(fine_target(ramp, 2, 0.0), DomainError);

  const std::vector<double> z{3.0, 4.0};
  const auto c = persona_condition(z, 2);
  REQUIRE(c.size() == 2 + corpus::vocab::kNumHints);
  CHECK(c[0] == doctest::Approx(0.6));
  CHECK(c[1] == doctest::Approx(0.8));
  CHECK(c[2 + 2] == 1.0);
  const std::vector<double> zero{0.0, 0.0};
  CHECK_THROWS_AS(persona_condition(zero, 1), DomainError);
  CHECK_THROWS_AS(persona_condition(z, corpus::vocab::kNumHints), DomainError);
}

TEST_CASE("config validation") {
  FlowConfig c;
  CHECK_NOTHROW(c.check());
  c.steps = 0;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = {};
  c.cond_dropout_prob = 1.5;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = {};
  c.fine_dim = 0;
  CHECK_THROWS_AS(c.check(), ConfigError);
  const auto round = flow_config_from_json(to_json(tiny_flow()));
  CHECK(to_json(round) == to_json(tiny_flow()));
}

TEST_CASE("missing stage") {
  ProsodyFlow f(tiny_flow(), 8, 1);
  const auto cond = persona_condition(std::vector<double>(8, 1.0), 0);
  CHECK_THROWS_AS(f.sample_coarse(cond, 1), ConfigError);
  f.mark_trained(true, false);
  CHECK_THROWS_AS(f.sample_coarse(cond, 1), ConfigError);
  f.mark_trained(true, true);
  CHECK_NOTHROW(f.sample_coarse(cond, 1));
}

TEST_CASE("training reduces the loss and beats the noise draw") {
  const auto& fx = fixture();
  const auto& log = fx.trained.log;
  REQUIRE(log.coarse_loss.size() == 40);
  std::printf("flow loss coarse %.4f -> %.4f, fine %.4f -> %.4f\n", log.coarse_loss.front(),
              log.coarse_loss.back(), log.fine_loss.front(), log.fine_loss.back());
  CHECK(log.coarse_loss.back() < 0.5 * log.coarse_loss.front());
  CHECK(log.fine_loss.back() < log.fine_loss.front());
  const auto val = fx.corpus.select(corpus::Split::kVal, true);
  const auto e = coarse_error(fx.trained.flow, fx.model, fx.corpus, val, fx.corpus.targets, 5);
  std::printf("coarse error %.4f vs noise %.4f\n", e.model, e.noise);
  CHECK(e.model < 0.5 * e.noise);
}

TEST_CASE("coarse samples follow the emotion in the condition") {
  const auto& fx = fixture();
  const auto& persona = fx.corpus.personas[0];
  double excited = 0.0, sad = 0.0;
  int ne = 0, ns = 0;
  for (std::size_t i : fx.corpus.by_character(persona.character_id)) {
    const auto& u = fx.corpus.utterances[i];
    if (u.emotion != corpus::Emotion::kExcited && u.emotion != corpus::Emotion::kSad) continue;
    const auto out = fx.model.run(persona, u.token_ids);
    const auto pr = fx.trained.flow.predict(out, u.token_ids, 7);
    if (u.emotion == corpus::Emotion::kExcited) {
      excited += pr.coarse[1];
      ++ne;
    } else {
      sad += pr.coarse[1];
      ++ns;
    }
  }
  REQUIRE(ne > 0);
  REQUIRE(ns > 0);
  CHECK(excited / ne - sad / ns >= 0.2);
}

TEST_CASE("prediction is deterministic and survives a checkpoint") {
  const auto& fx = fixture();
  const auto& u = fx.corpus.utterances[0];
  const auto out = fx.model.run(fx.corpus.persona(u.character_id), u.token_ids);
  const auto a = fx.trained.flow.predict(out, u.token_ids, 42);
  const auto b = fx.trained.flow.predict(out, u.token_ids, 42);
  CHECK(a.coarse == b.coarse);
  CHECK(a.fine == b.fine);
  CHECK(a.fine.size() == 2 * tiny_flow().fine_dim);
  const auto copy = ProsodyFlow::from_checkpoint(
      nk::decode_checkpoint(nk::encode_checkpoint(fx.trained.flow.to_checkpoint())));
  const auto c = copy.predict(out, u.token_ids, 42);
  CHECK(c.coarse == a.coarse);
  CHECK(c.fine == a.fine);
  const auto d = fx.trained.flow.predict(out, u.token_ids, 43);
  CHECK(d.coarse != a.coarse);

  SUBCASE("fine stage reads the coarse vector") {
    const auto cond = persona_condition(out.z, corpus::vocab::emotion_hint(u.token_ids));
    auto coarse = a.coarse;
    const auto f1 = fx.trained.flow.sample_fine(cond, coarse, 1);
    coarse[1] = coarse[1] > 0.5 ? 0.0 : 1.0;
    const auto f2 = fx.trained.flow.sample_fine(cond, coarse, 1);
    CHECK(f1 != f2);
  }
}

TEST_CASE("training guards") {
  auto c = fixture().corpus;
  for (std::size_t i = 0; i < c.utterances.size(); ++i) {
    if (!c.utterances[i].seen) {
      c.utterances[i].split = corpus::Split::kTrain;
      break;
    }
  }
  CHECK_THROWS_AS(train_flow(c, fixture().model, tiny_flow(), 1), LeakageError);
}
