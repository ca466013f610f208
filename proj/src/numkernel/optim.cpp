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

#include "duotrack/numkernel/optim.hpp"

#include <cmath>
#include <numbers>

#include "duotrack/core/errors.hpp"

namespace duotrack::nk {

void adamw_step(Tensor& param, const Tensor& grad, AdamMoments& moments, std::int64_t step,
                double lr, const AdamWConfig& cfg) {
  if (param.size() != grad.size() || moments.m.size() != param.size() ||
      moments.v.size() != param.size()) {
    throw ShapeError("adamw_step: parameter, gradient and moments must align");
  }
  if (step < 1) throw ContractError("adamw_step: step count starts at 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    double& m = moments.m[i];
    double& v = moments.v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    param[i] -= lr * cfg.weight_decay * param[i];
    param[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

AdamW::AdamW(const ParamStore& params, AdamWConfig cfg) : cfg_(cfg) {
  for (const auto& e : params.entries()) {
    moments_.push_back({Tensor::zeros(e.value.shape()), Tensor::zeros(e.value.shape())});
  }
}

void AdamW::step(ParamStore& params, const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != params.size() || moments_.size() != params.size()) {
    throw ShapeError("AdamW::step: gradient count does not match parameter count");
  }
  ++step_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adamw_step(params.entries()[i].value, grads[i], moments_[i], step_, lr, cfg_);
  }
}

void AdamW::save(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put(prefix + "step", Tensor::scalar(static_cast<double>(step_)));
  for (std::size_t i = 0; i < moments_.size(); ++i) {
    ckpt.put(prefix + "m." + std::to_string(i), moments_[i].m);
    ckpt.put(prefix + "v." + std::to_string(i), moments_[i].v);
  }
}

void AdamW::load(const Checkpoint& ckpt, const std::string& prefix) {
  step_ = static_cast<std::int64_t>(ckpt.get(prefix + "step").item());
  for (std::size_t i = 0; i < moments_.size(); ++i) {
    moments_[i].m = ckpt.get(prefix + "m." + std::to_string(i));
    moments_[i].v = ckpt.get(prefix + "v." + std::to_string(i));
  }
}

double cosine_lr(double base, double floor, int epoch, int epochs) {
  if (epochs <= 1) return base;
  const double progress = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return floor + 0.5 * (base - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace duotrack::nk
