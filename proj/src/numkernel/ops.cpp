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

#include "duotrack/numkernel/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "duotrack/core/errors.hpp"

namespace duotrack::nk {

namespace {

enum class Broadcast { kSame, kRow, kScalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.size() == 1) return Broadcast::kScalar;
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

// Reduces a gradient shaped like `a` down to the shape of broadcast operand `b`.
void accumulate_broadcast(Tensor& gb, const Tensor& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::kSame:
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      break;
    case Broadcast::kRow: {
      const std::size_t n = g.cols();
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
      break;
    }
    case Broadcast::kScalar: {
      double s = 0.0;
      for (double v : g.data()) s += v;
      gb[0] += s;
      break;
    }
  }
}

inline double b_at(const Tensor& b, Broadcast kind, std::size_t i, std::size_t n) {
  switch (kind) {
    case Broadcast::kSame:
      return b[i];
    case Broadcast::kRow:
      return b[i % n];
    case Broadcast::kScalar:
      return b[0];
  }
  return 0.0;
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("op on an unbound Var");
  return *a.tape();
}

template <class F, class D>
Var unary(Var a, F f, D dfdx) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor y = x;
  for (auto& v : y.data()) v = f(v);
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, dfdx](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(ia);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(xv[i]);
  });
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }
double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  Tensor c = matmul_plain(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(c), {a, b}, [ia, ib](Tape& tp, const Tensor& g) {
    const Tensor& av = tp.value(ia);
    const Tensor& bv = tp.value(ib);
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    if (tp.requires_grad(ia)) {
      kernels::gemm_nt(g.ptr(), bv.ptr(), tp.grad_buffer(ia).ptr(), m, n, k);
    }
    if (tp.requires_grad(ib)) {
      kernels::gemm_tn(av.ptr(), g.ptr(), tp.grad_buffer(ib).ptr(), k, m, n);
    }
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  Tensor y = Tensor::zeros({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y(j, i) = x(i, j);
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, r, c](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  const Broadcast kind = broadcast_kind(x, z, "add");
  Tensor y = x;
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b_at(z, kind, i, n);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(y), {a, b}, [ia, ib, kind](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(ib)) accumulate_broadcast(tp.grad_buffer(ib), g, kind);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  const Broadcast kind = broadcast_kind(x, z, "sub");
  Tensor y = x;
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b_at(z, kind, i, n);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(y), {a, b}, [ia, ib, kind](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(ib)) {
      Tensor neg = g;
      for (auto& v : neg.data()) v = -v;
      accumulate_broadcast(tp.grad_buffer(ib), neg, kind);
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  const Broadcast kind = broadcast_kind(x, z, "mul");
  Tensor y = x;
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b_at(z, kind, i, n);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(y), {a, b}, [ia, ib, kind, n](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(ia);
    const Tensor& zv = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b_at(zv, kind, i, n);
    }
    if (tp.requires_grad(ib)) {
      Tensor prod = g;
      for (std::size_t i = 0; i < g.size(); ++i) prod[i] = g[i] * xv[i];
      accumulate_broadcast(tp.grad_buffer(ib), prod, kind);
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Tensor y = a.value();
  for (auto& v : y.data()) v *= s;
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, s](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

Var add_scalar(Var a, double c) {
  Tape& t = tape_of(a);
  Tensor y = a.value();
  for (auto& v : y.data()) v += c;
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var mul_const(Var a, const Tensor& c) {
  Tape& t = tape_of(a);
  if (!a.value().same_shape(c)) throw ShapeError("mul_const: shape mismatch");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= c[i];
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, c](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c[i];
  });
}

Var add_const(Var a, const Tensor& c) {
  Tape& t = tape_of(a);
  if (!a.value().same_shape(c)) throw ShapeError("add_const: shape mismatch");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c[i];
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double x) {
        const double y = std::tanh(x);
        return 1.0 - y * y;
      });
}

Var sigmoid(Var a) {
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  return unary(a, sig, [sig](double x) {
    const double y = sig(x);
    return y * (1.0 - y);
  });
}

Var gelu(Var a) { return unary(a, gelu_value, gelu_grad); }

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw DomainError("log of a non-positive value");
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var sqrt(Var a) {
  for (double v : a.value().data()) {
    if (v < 0.0) throw DomainError("sqrt of a negative value");
  }
  return unary(
      a, [](double x) { return std::sqrt(x); },
      [](double x) { return 0.5 / std::sqrt(x); });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  Tensor y = x;
  for (std::size_t i = 0; i < r; ++i) {
    auto row = y.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      s += v;
    }
    for (auto& v : row) v /= s;
  }
  const std::size_t ia = a.id();
  Tensor ycopy = y;
  return t.record(std::move(y), {a}, [ia, r, c, ycopy](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * ycopy[i * c + j];
      for (std::size_t j = 0; j < c; ++j)
        ga[i * c + j] += ycopy[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  Tensor y = x;
  Tensor probs = x;
  for (std::size_t i = 0; i < r; ++i) {
    auto row = y.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) {
      row[j] -= lse;
      probs(i, j) = std::exp(row[j]);
    }
  }
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, r, c, probs](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += g[i * c + j];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] - probs(i, j) * gs;
    }
  });
}

Var layernorm_rows(Var x, Var gain, Var bias, double eps) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (gain.value().size() != c || bias.value().size() != c) {
    throw ShapeError("layernorm: gain/bias width must match input columns");
  }
  Tensor xhat = xv;
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    auto row = xhat.row(i);
    double mu = 0.0;
    for (double v : row) mu += v;
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (auto& v : row) v = (v - mu) * inv_std[i];
  }
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor y = xhat;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y(i, j) = xhat(i, j) * gv[j] + bv[j];
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return t.record(std::move(y), {x, gain, bias},
                  [ix, ig, ib, r, c, xhat, inv_std](Tape& tp, const Tensor& g) {
                    const Tensor& gv2 = tp.value(ig);
                    if (tp.requires_grad(ig)) {
                      Tensor& gg = tp.grad_buffer(ig);
                      for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * xhat(i, j);
                    }
                    if (tp.requires_grad(ib)) {
                      Tensor& gb = tp.grad_buffer(ib);
                      for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
                    }
                    if (tp.requires_grad(ix)) {
                      Tensor& gx = tp.grad_buffer(ix);
                      const double inv_c = 1.0 / static_cast<double>(c);
                      for (std::size_t i = 0; i < r; ++i) {
                        double m1 = 0.0, m2 = 0.0;
                        for (std::size_t j = 0; j < c; ++j) {
                          const double dxh = g[i * c + j] * gv2[j];
                          m1 += dxh;
                          m2 += dxh * xhat(i, j);
                        }
                        m1 *= inv_c;
                        m2 *= inv_c;
                        for (std::size_t j = 0; j < c; ++j) {
                          const double dxh = g[i * c + j] * gv2[j];
                          gx[i * c + j] += inv_std[i] * (dxh - m1 - xhat(i, j) * m2);
                        }
                      }
                    }
                  });
}

Var normalize_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  Tensor y = x;
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) throw DomainError("normalize_rows: zero-norm row");
    for (auto& v : y.row(i)) v /= norms[i];
  }
  const std::size_t ia = a.id();
  Tensor ycopy = y;
  return t.record(std::move(y), {a}, [ia, r, c, norms, ycopy](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += ycopy(i, j) * g[i * c + j];
      for (std::size_t j = 0; j < c; ++j)
        ga[i * c + j] += (g[i * c + j] - ycopy(i, j) * dot) / norms[i];
    }
  });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  Tape& t = tape_of(table);
  const Tensor& tv = table.value();
  const std::size_t c = tv.cols();
  if (ids.empty()) throw ShapeError("gather_rows: empty index list");
  Tensor y = Tensor::zeros({ids.size(), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) throw DomainError("gather_rows: index out of range");
    std::copy_n(tv.ptr() + ids[i] * c, c, y.ptr() + i * c);
  }
  const std::size_t it = table.id();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return t.record(std::move(y), {table}, [it, c, idx](Tape& tp, const Tensor& g) {
    Tensor& gt = tp.grad_buffer(it);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) gt[idx[i] * c + j] += g[i * c + j];
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return t.record(Tensor::scalar(s), {a}, [ia](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (auto& v : ga.data()) v += g[0];
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mean_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  Tensor y = Tensor::zeros({1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j] += x(i, j);
  const double inv = 1.0 / static_cast<double>(r);
  for (auto& v : y.data()) v *= inv;
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, r, c, inv](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j] * inv;
  });
}

Var squared_error(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  if (!x.same_shape(z) || x.size() != z.size()) throw ShapeError("squared_error: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - z[i]) * (x[i] - z[i]);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(Tensor::scalar(s), {a, b}, [ia, ib](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(ia);
    const Tensor& zv = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < xv.size(); ++i) ga[i] += 2.0 * g[0] * (xv[i] - zv[i]);
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < xv.size(); ++i) gb[i] -= 2.0 * g[0] * (xv[i] - zv[i]);
    }
  });
}

Var l2_norm(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  const double n = std::sqrt(s);
  const std::size_t ia = a.id();
  return t.record(Tensor::scalar(n), {a}, [ia, n](Tape& tp, const Tensor& g) {
    // Subgradient 0 at the origin.
    if (n == 0.0) return;
    const Tensor& xv = tp.value(ia);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < xv.size(); ++i) ga[i] += g[0] * xv[i] / n;
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t c = parts[0].value().cols();
  std::size_t r = 0;
  for (const Var& p : parts) {
    if (p.value().cols() != c) throw ShapeError("concat_rows: column mismatch");
    r += p.value().rows();
  }
  Tensor y = Tensor::zeros({r, c});
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().ptr(), p.value().size(), y.ptr() + off * c);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.value().rows();
  }
  std::vector<Var> pv(parts.begin(), parts.end());
  return t.record(std::move(y), pv, [ids, offsets, c](Tape& tp, const Tensor& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Tensor& gp = tp.grad_buffer(ids[k]);
      const double* src = g.ptr() + offsets[k] * c;
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += src[i];
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t r = parts[0].value().rows();
  std::size_t c = 0;
  for (const Var& p : parts) {
    if (p.value().rows() != r) throw ShapeError("concat_cols: row mismatch");
    c += p.value().cols();
  }
  Tensor y = Tensor::zeros({r, c});
  std::vector<std::size_t> ids, offsets, widths;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const std::size_t w = v.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) y(i, off + j) = v(i, j);
    ids.push_back(p.id());
    offsets.push_back(off);
    widths.push_back(w);
    off += w;
  }
  std::vector<Var> pv(parts.begin(), parts.end());
  return t.record(std::move(y), pv, [ids, offsets, widths, r, c](Tape& tp, const Tensor& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Tensor& gp = tp.grad_buffer(ids[k]);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < widths[k]; ++j)
          gp[i * widths[k] + j] += g[i * c + offsets[k] + j];
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (begin >= end || end > x.rows()) throw ShapeError("slice_rows: bad range");
  const std::size_t c = x.cols();
  Tensor y = Tensor::zeros({end - begin, c});
  std::copy_n(x.ptr() + begin * c, (end - begin) * c, y.ptr());
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, begin, c](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * c + i] += g[i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (begin >= end || end > x.cols()) throw ShapeError("slice_cols: bad range");
  const std::size_t r = x.rows(), c = x.cols(), w = end - begin;
  Tensor y = Tensor::zeros({r, w});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) y(i, j) = x(i, begin + j);
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, begin, r, c, w](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * c + begin + j] += g[i * w + j];
  });
}

Var pick(Var a, std::size_t row, std::size_t col) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (row >= x.rows() || col >= x.cols()) throw ShapeError("pick: index out of range");
  const std::size_t c = x.cols();
  const std::size_t ia = a.id();
  return t.record(Tensor::scalar(x(row, col)), {a}, [ia, row, col, c](Tape& tp, const Tensor& g) {
    tp.grad_buffer(ia)[row * c + col] += g[0];
  });
}

Var cross_entropy_row(Var logits, std::size_t row, std::size_t label) {
  return scale(pick(log_softmax_rows(slice_rows(logits, row, row + 1)), 0, label), -1.0);
}

Var cross_entropy_mean(Var logits, std::span<const std::size_t> labels) {
  Tape& t = tape_of(logits);
  const Tensor& x = logits.value();
  const std::size_t m = x.rows(), n = x.cols();
  if (labels.size() != m) throw ShapeError("cross_entropy_mean: one label per row required");
  Tensor probs = Tensor::zeros({m, n});
  double total = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (labels[r] >= n) throw ContractError("cross_entropy_mean: label out of range");
    double mx = x(r, 0);
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, x(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      probs(r, c) = std::exp(x(r, c) - mx);
      z += probs(r, c);
    }
    for (std::size_t c = 0; c < n; ++c) probs(r, c) /= z;
    total -= x(r, labels[r]) - mx - std::log(z);
  }
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  const std::size_t il = logits.id();
  return t.record(Tensor::scalar(total / static_cast<double>(m)), {logits},
                  [il, probs = std::move(probs), lab = std::move(lab)](Tape& tp, const Tensor& g) {
                    Tensor& gl = tp.grad_buffer(il);
                    const std::size_t rows = probs.rows(), cols = probs.cols();
                    const double s = g[0] / static_cast<double>(rows);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t c = 0; c < cols; ++c) {
                        const double onehot = c == lab[r] ? 1.0 : 0.0;
                        gl[r * cols + c] += s * (probs(r, c) - onehot);
                      }
                    }
                  });
}

}  // namespace duotrack::nk
