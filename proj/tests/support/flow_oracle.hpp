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

// Plain re-implementation of the velocity network and the flow matching loss,
// written against the parameter values only.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "duotrack/core/rng.hpp"
#include "duotrack/numkernel/params.hpp"

namespace duotrack::testing {

using Vec = std::vector<double>;

inline Vec plain_affine(const nk::ParamStore& ps, const std::string& name, const Vec& x) {
  const auto& w = ps.get(name + ".W");
  const auto& b = ps.get(name + ".b");
  Vec y(w.cols());
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double s = b(0, j);
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w(i, j);
    y[j] = s;
  }
  return y;
}

inline Vec plain_norm(const nk::ParamStore& ps, const std::string& name, const Vec& x) {
  double mu = 0.0, var = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(x.size());
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(x.size());
  const auto& g = ps.get(name + ".g");
  const auto& b = ps.get(name + ".b");
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = (x[i] - mu) / std::sqrt(var + 1e-5) * g(0, i) + b(0, i);
  return y;
}

inline Vec plain_gelu(Vec x) {
  for (double& v : x) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  return x;
}

// `c` empty means the learned null token.
inline Vec plain_velocity(const nk::ParamStore& ps, std::size_t blocks, const Vec& x, double t,
                          const Vec& c) {
  Vec in = x;
  in.push_back(t);
  for (int k = 1; k <= 3; ++k) {
    in.push_back(std::sin(2.0 * std::numbers::pi * k * t));
    in.push_back(std::cos(2.0 * std::numbers::pi * k * t));
  }
  if (c.empty()) {
    const auto& null = ps.get("null");
    for (std::size_t j = 0; j < null.cols(); ++j) in.push_back(null(0, j));
  } else {
    in.insert(in.end(), c.begin(), c.end());
  }
  Vec h = plain_affine(ps, "in", in);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::string pre = "block" + std::to_string(b);
    const Vec r = plain_affine(ps, pre + ".mlp.1",
                               plain_gelu(plain_affine(ps, pre + ".mlp.0", plain_norm(ps, pre + ".ln", h))));
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += r[i];
  }
  return plain_affine(ps, "out", plain_gelu(plain_norm(ps, "out_ln", h)));
}

// Single-example loss with the draw order noise, time, dropout.
inline double plain_cfm_loss(const nk::ParamStore& ps, std::size_t blocks, const Vec& x1,
                             const Vec& c, double drop, Rng& rng) {
  Vec x0(x1.size());
  for (double& v : x0) v = rng.normal();
  const double t = rng.uniform();
  const bool dropped = rng.uniform() < drop;
  Vec xt(x1.size());
  for (std::size_t i = 0; i < x1.size(); ++i) xt[i] = (1.0 - t) * x0[i] + t * x1[i];
  const Vec v = plain_velocity(ps, blocks, xt, t, dropped ? Vec{} : c);
  double s = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const double d = v[i] - (x1[i] - x0[i]);
    s += d * d;
  }
  return s;
}

}  // namespace duotrack::testing
