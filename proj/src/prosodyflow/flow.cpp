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

#include "duotrack/prosodyflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "duotrack/core/errors.hpp"
#include "duotrack/numkernel/layers.hpp"
#include "duotrack/numkernel/ops.hpp"

namespace duotrack::flow {

using nlohmann::json;
using nk::Bound;
using nk::Tape;
using nk::Tensor;
using nk::Var;

void FlowConfig::check() const {
  if (steps < 1) throw ConfigError("flow steps must be at least 1");
  if (!(cfg_scale >= 0.0)) throw ConfigError("cfg_scale must be non-negative");
  if (!(cond_dropout_prob >= 0.0 && cond_dropout_prob < 1.0))
    throw ConfigError("cond_dropout_prob must lie in [0, 1)");
  if (coarse_dim == 0 || fine_dim == 0 || hidden == 0)
    throw ConfigError("flow dimensions must be positive");
  if (epochs < 0 || batch == 0 || draws_per_item == 0)
    throw ConfigError("flow epochs must be >= 0, batch and draws positive");
  if (!(lr > 0.0) || lr_floor < 0.0 || weight_decay < 0.0)
    throw ConfigError("flow learning rates and weight decay must be non-negative");
}

json to_json(const FlowConfig& c) {
  return json{{"steps", c.steps},
              {"cfg_scale", c.cfg_scale},
              {"cond_dropout_prob", c.cond_dropout_prob},
              {"coarse_dim", c.coarse_dim},
              {"fine_dim", c.fine_dim},
              {"hidden", c.hidden},
              {"blocks", c.blocks},
              {"epochs", c.epochs},
              {"batch", c.batch},
              {"draws_per_item", c.draws_per_item},
              {"lr", c.lr},
              {"lr_floor", c.lr_floor},
              {"weight_decay", c.weight_decay}};
}

FlowConfig flow_config_from_json(const json& j) {
  FlowConfig c;
  try {
    c.steps = j.value("steps", c.steps);
    c.cfg_scale = j.value("cfg_scale", c.cfg_scale);
    c.cond_dropout_prob = j.value("cond_dropout_prob", c.cond_dropout_prob);
    c.coarse_dim = j.value("coarse_dim", c.coarse_dim);
    c.fine_dim = j.value("fine_dim", c.fine_dim);
    c.hidden = j.value("hidden", c.hidden);
    c.blocks = j.value("blocks", c.blocks);
    c.epochs = j.value("epochs", c.epochs);
    c.batch = j.value("batch", c.batch);
    c.draws_per_item = j.value("draws_per_item", c.draws_per_item);
    c.lr = j.value("lr", c.lr);
    c.lr_floor = j.value("lr_floor", c.lr_floor);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("flow config: ") + e.what());
  }
  c.check();
  return c;
}

Tensor time_features(std::span<const double> t) {
  Tensor out = Tensor::zeros({t.size(), kTimeFeatures});
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t r = 0; r < t.size(); ++r) {
    out(r, 0) = t[r];
    for (std::size_t k = 1; k <= 3; ++k) {
      out(r, 2 * k - 1) = std::sin(two_pi * static_cast<double>(k) * t[r]);
      out(r, 2 * k) = std::cos(two_pi * static_cast<double>(k) * t[r]);
    }
  }
  return out;
}

VelocityNet::VelocityNet(std::size_t x_dim, std::size_t cond_dim, std::size_t hidden,
                         std::size_t blocks, std::uint64_t seed)
    : x_dim_(x_dim), cond_dim_(cond_dim), blocks_(blocks) {
  Rng rng(seed);
  nk::add_linear(params_, "in", x_dim + kTimeFeatures + cond_dim, hidden, rng);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::string pre = "block" + std::to_string(b);
    nk::add_layernorm(params_, pre + ".ln", hidden);
    nk::add_mlp(params_, pre + ".mlp", {hidden, hidden, hidden}, rng);
  }
  nk::add_layernorm(params_, "out_ln", hidden);
  nk::add_linear(params_, "out", hidden, x_dim, rng);
  params_.add("null", nk::normal_init({1, cond_dim}, 0.1, rng));
}

Var VelocityNet::forward(const Bound& p, Var x, Var t_features, Var c) const {
  const Var parts[] = {x, t_features, c};
  Var h = nk::linear(p, "in", nk::concat_cols(parts));
  for (std::size_t b = 0; b < blocks_; ++b) {
    const std::string pre = "block" + std::to_string(b);
    h = nk::add(h, nk::mlp(p, pre + ".mlp", nk::layer_norm(p, pre + ".ln", h), 2));
  }
  return nk::linear(p, "out", nk::gelu(nk::layer_norm(p, "out_ln", h)));
}

Var VelocityNet::conditions(const Bound& p, const Tensor& c, const std::vector<bool>& dropped) const {
  if (c.cols() != cond_dim_ || dropped.size() != c.rows())
    throw ShapeError("velocity net condition has the wrong shape");
  Tape& tape = *p["null"].tape();
  if (std::none_of(dropped.begin(), dropped.end(), [](bool d) { return d; }))
    return tape.constant(c);
  Tensor kept = c;
  Tensor mask = Tensor::zeros({c.rows(), 1});
  for (std::size_t r = 0; r < c.rows(); ++r) {
    if (!dropped[r]) continue;
    mask(r, 0) = 1.0;
    for (double& v : kept.row(r)) v = 0.0;
  }
  return nk::add(tape.constant(kept), nk::matmul(tape.constant(mask), p["null"]));
}

std::vector<double> VelocityNet::velocity(std::span<const double> x, double t,
                                          std::span<const double> c) const {
  if (x.size() != x_dim_) throw ShapeError("velocity input has the wrong size");
  const bool null = c.empty();
  if (!null && c.size() != cond_dim_) throw ShapeError("velocity condition has the wrong size");
  Tape tape;
  Bound p(tape, params_, false);
  const Tensor cond = null ? Tensor::zeros({1, cond_dim_})
                           : Tensor::matrix(1, cond_dim_, {c.begin(), c.end()});
  const double ts[] = {t};
  const Var v = forward(p, tape.constant(Tensor::matrix(1, x_dim_, {x.begin(), x.end()})),
                        tape.constant(time_features(ts)), conditions(p, cond, {null}));
  return {v.value().data().begin(), v.value().data().end()};
}

Var cfm_loss_at(const Bound& p, const VelocityNet& net, const Tensor& x1, const Tensor& x0,
                const std::vector<double>& t, const Tensor& c, const std::vector<bool>& dropped) {
  if (!x1.same_shape(x0) || x1.cols() != net.x_dim() || t.size() != x1.rows())
    throw ShapeError("cfm loss inputs disagree in shape");
  Tensor xt = x1;
  Tensor u = x1;
  for (std::size_t r = 0; r < x1.rows(); ++r) {
    for (std::size_t k = 0; k < x1.cols(); ++k) {
      xt(r, k) = (1.0 - t[r]) * x0(r, k) + t[r] * x1(r, k);
      u(r, k) = x1(r, k) - x0(r, k);
    }
  }
  Tape& tape = *p["null"].tape();
  const Var v = net.forward(p, tape.constant(xt), tape.constant(time_features(t)),
                            net.conditions(p, c, dropped));
  return nk::scale(nk::squared_error(v, tape.constant(u)), 1.0 / static_cast<double>(x1.rows()));
}

Var cfm_train_loss(const Bound& p, const VelocityNet& net, const Tensor& x1, const Tensor& c,
                   double dropout_prob, Rng& rng) {
  Tensor x0 = Tensor::zeros(x1.shape());
  for (double& v : x0.data()) v = rng.normal();
  std::vector<double> t(x1.rows());
  for (double& v : t) v = rng.uniform();
  std::vector<bool> dropped(x1.rows());
  for (std::size_t r = 0; r < dropped.size(); ++r) dropped[r] = rng.bernoulli(dropout_prob);
  return cfm_loss_at(p, net, x1, x0, t, c, dropped);
}

double cfm_train_loss_value(const VelocityNet& net, std::span<const double> x1,
                            std::span<const double> c, double dropout_prob, Rng& rng) {
  Tape tape;
  Bound p(tape, net.params(), false);
  return cfm_train_loss(p, net, Tensor::matrix(1, x1.size(), {x1.begin(), x1.end()}),
                        Tensor::matrix(1, c.size(), {c.begin(), c.end()}), dropout_prob, rng)
      .value()
      .item();
}

std::vector<double> initial_noise(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(dim);
  for (double& v : x) v = rng.normal();
  return x;
}

std::vector<double> euler_sample(const VelocityFn& v, std::size_t dim, int steps, double cfg_scale,
                                 std::uint64_t seed, std::span<const double> lo,
                                 std::span<const double> hi) {
  if (steps < 1) throw ConfigError("flow steps must be at least 1");
  std::vector<double> x = initial_noise(dim, seed);
  const double dt = 1.0 / static_cast<double>(steps);
  for (int k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(steps);
    std::vector<double> vel;
    if (cfg_scale == 1.0) {
      vel = v(x, t, true);
    } else if (cfg_scale == 0.0) {
      vel = v(x, t, false);
    } else {
      const auto vn = v(x, t, false);
      const auto vc = v(x, t, true);
      vel.resize(dim);
      for (std::size_t i = 0; i < dim; ++i) vel[i] = vn[i] + cfg_scale * (vc[i] - vn[i]);
    }
    if (vel.size() != dim) throw ShapeError("velocity has the wrong size");
    for (std::size_t i = 0; i < dim; ++i) x[i] += dt * vel[i];
  }
  if (!lo.empty() || !hi.empty()) {
    if (lo.size() != dim || hi.size() != dim) throw ShapeError("sampler bounds have the wrong size");
    for (std::size_t i = 0; i < dim; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
  }
  return x;
}

double gaussian_oracle_velocity(double x, double t, double mu, double sigma) {
  const double s2 = sigma * sigma;
  const double var = (1.0 - t) * (1.0 - t) + t * t * s2;
  return mu + (t * s2 - (1.0 - t)) / var * (x - t * mu);
}

nk::Checkpoint to_checkpoint(const VelocityNet& net, const std::string& prefix, nk::Checkpoint ck) {
  for (const auto& e : net.params().entries()) ck.put(prefix + e.name, e.value);
  return ck;
}

VelocityNet velocity_from_checkpoint(const nk::Checkpoint& ck, const std::string& prefix,
                                     std::size_t x_dim, std::size_t cond_dim, std::size_t hidden,
                                     std::size_t blocks) {
  VelocityNet net(x_dim, cond_dim, hidden, blocks, 0);
  for (auto& e : net.params().entries()) {
    const Tensor& t = ck.get(prefix + e.name);
    if (!t.same_shape(e.value))
      throw DataError("checkpoint tensor " + prefix + e.name + " has wrong shape");
    e.value = t;
  }
  return net;
}

}  // namespace duotrack::flow
