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

#include <cstdint>
#include <string>
#include <vector>

#include "duotrack/numkernel/params.hpp"

namespace duotrack::nk {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamMoments {
  Tensor m;
  Tensor v;
};

// One decoupled-weight-decay Adam update of a single tensor. `step` is the
// 1-based count of updates including this one.
void adamw_step(Tensor& param, const Tensor& grad, AdamMoments& moments, std::int64_t step,
                double lr, const AdamWConfig& cfg);

class AdamW {
 public:
  AdamW(const ParamStore& params, AdamWConfig cfg);

  void step(ParamStore& params, const std::vector<Tensor>& grads, double lr);
  std::int64_t steps() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }

  void save(Checkpoint& ckpt, const std::string& prefix) const;
  void load(const Checkpoint& ckpt, const std::string& prefix);

 private:
  AdamWConfig cfg_;
  std::vector<AdamMoments> moments_;
  std::int64_t step_ = 0;
};

// Cosine annealing from `base` at epoch 0 to `floor` at epoch `epochs - 1`.
double cosine_lr(double base, double floor, int epoch, int epochs);

}  // namespace duotrack::nk
