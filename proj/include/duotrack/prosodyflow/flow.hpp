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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "duotrack/core/rng.hpp"
#include "duotrack/numkernel/params.hpp"
#include "json.hpp"

namespace duotrack::flow {

struct FlowConfig {
  int steps = 8;
  double cfg_scale = 2.0;
  double cond_dropout_prob = 0.1;
  std::size_t coarse_dim = 5;
  std::size_t fine_dim = 32;  // grid points per fine channel (pitch, energy)
  std::size_t hidden = 128;
  std::size_t blocks = 2;
  int epochs = 60;
  std::size_t batch = 64;
  std::size_t draws_per_item = 4;  // (noise, time) draws per example and epoch
  double lr = 2e-3;
  double lr_floor = 1e-4;
  double weight_decay = 1e-4;

  void check() const;
};

nlohmann::json to_json(const FlowConfig& c);
FlowConfig flow_config_from_json(const nlohmann::json& j);

inline constexpr std::size_t kTimeFeatures = 7;

// [t, sin(2 pi k t), cos(2 pi k t) for k = 1..3], one row per entry of `t`.
nk::Tensor time_features(std::span<const double> t);

// Residual MLP v(x_t, t, c). A learned null token stands in for the condition
// when it is dropped.
class VelocityNet {
 public:
  VelocityNet() = default;
  VelocityNet(std::size_t x_dim, std::size_t cond_dim, std::size_t hidden, std::size_t blocks,
              std::uint64_t seed);

  std::size_t x_dim() const { return x_dim_; }
  std::size_t cond_dim() const { return cond_dim_; }
  nk::ParamStore& params() { return params_; }
  const nk::ParamStore& params() const { return params_; }

  // x: Bxd, t_features: Bx7, c: Bxcond.
  nk::Var forward(const nk::Bound& p, nk::Var x, nk::Var t_features, nk::Var c) const;
  // Rows of `c` whose `dropped` flag is set are replaced by the null token.
  nk::Var conditions(const nk::Bound& p, const nk::Tensor& c, const std::vector<bool>& dropped) const;

  // Single evaluation; an empty `c` selects the null token.
  std::vector<double> velocity(std::span<const double> x, double t, std::span<const double> c) const;

 private:
  std::size_t x_dim_ = 0;
  std::size_t cond_dim_ = 0;
  std::size_t blocks_ = 0;
  nk::ParamStore params_;
};

// Mean over rows of ||v(x_t, t, c) - (x1 - x0)||^2 with x_t = (1-t) x0 + t x1,
// for given noise, times and dropout flags.
nk::Var cfm_loss_at(const nk::Bound& p, const VelocityNet& net, const nk::Tensor& x1,
                    const nk::Tensor& x0, const std::vector<double>& t, const nk::Tensor& c,
                    const std::vector<bool>& dropped);

// Draws x0 (row-major standard normals), then t ~ U(0,1) per row, then one
// dropout flag per row, in that order, and evaluates cfm_loss_at.
nk::Var cfm_train_loss(const nk::Bound& p, const VelocityNet& net, const nk::Tensor& x1,
                       const nk::Tensor& c, double dropout_prob, Rng& rng);
double cfm_train_loss_value(const VelocityNet& net, std::span<const double> x1,
                            std::span<const double> c, double dropout_prob, Rng& rng);

// Velocity callback: `conditional` selects v_cond or v_null.
using VelocityFn =
    std::function<std::vector<double>(const std::vector<double>& x, double t, bool conditional)>;

// Euler integration of the guided field from a seeded standard-normal draw.
// Scale 1 evaluates only the conditional branch and scale 0 only the null
// branch. The result is clamped elementwise to [lo, hi]; empty bounds leave it
// unclamped.
std::vector<double> euler_sample(const VelocityFn& v, std::size_t dim, int steps, double cfg_scale,
                                 std::uint64_t seed, std::span<const double> lo = {},
                                 std::span<const double> hi = {});

// Seeded standard-normal draw used as the sampler's starting point.
std::vector<double> initial_noise(std::size_t dim, std::uint64_t seed);

// Exact marginal velocity of the linear path between N(0,1) and N(mu, sigma^2)
// with independent coupling.
double gaussian_oracle_velocity(double x, double t, double mu, double sigma);

nk::Checkpoint to_checkpoint(const VelocityNet& net, const std::string& prefix,
                             nk::Checkpoint ck = {});
VelocityNet velocity_from_checkpoint(const nk::Checkpoint& ck, const std::string& prefix,
                                     std::size_t x_dim, std::size_t cond_dim, std::size_t hidden,
                                     std::size_t blocks);

}  // namespace duotrack::flow
