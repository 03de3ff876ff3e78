/*
 * Copyright 2026 The ftsched Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ftsched/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ftsched/error.hpp"

namespace ftsched::ad {
namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw StateError("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape() || !a.valid()) {
    throw StateError("operands recorded on different tapes");
  }
  return *a.tape();
}

void require_rank2(Var a, const char* op) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 operand, got " +
                         shape_str(a.shape()));
  }
}

void require_same(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const std::size_t n = x.shape()[0], k = x.shape()[1], m = y.shape()[1];
  if (y.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions differ " +
                         shape_str(x.shape()) + " x " + shape_str(y.shape()));
  }
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      if (xv == 0.0) continue;
      const double* yrow = y.data().data() + p * m;
      double* orow = &out[i * m];
      for (std::size_t j = 0; j < m; ++j) orow[j] += xv * yrow[j];
    }
  }
  const Var parents[] = {a, b};
  return tape.record(std::move(out), parents,
                     [a, b, n, k, m](Tape& t, std::span<const double> g) {
                       const Tensor& x = t.value(a);
                       const Tensor& y = t.value(b);
                       if (t.requires_grad(a)) {
                         auto ga = t.grad_of(a);
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double s = 0.0;
                             for (std::size_t j = 0; j < m; ++j)
                               s += g[i * m + j] * y[p * m + j];
                             ga[i * k + p] += s;
                           }
                       }
                       if (t.requires_grad(b)) {
                         auto gb = t.grad_of(b);
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double xv = x[i * k + p];
                             if (xv == 0.0) continue;
                             for (std::size_t j = 0; j < m; ++j)
                               gb[p * m + j] += xv * g[i * m + j];
                           }
                       }
                     });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same(a, b, "add");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  const Var parents[] = {a, b};
  return tape.record(std::move(out), parents,
                     [a, b](Tape& t, std::span<const double> g) {
                       for (Var v : {a, b}) {
                         if (!t.requires_grad(v)) continue;
                         auto gv = t.grad_of(v);
                         for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
                       }
                     });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same(a, b, "sub");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  const Var parents[] = {a, b};
  return tape.record(std::move(out), parents,
                     [a, b](Tape& t, std::span<const double> g) {
                       if (t.requires_grad(a)) {
                         auto ga = t.grad_of(a);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                       if (t.requires_grad(b)) {
                         auto gb = t.grad_of(b);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       }
                     });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same(a, b, "mul");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  const Var parents[] = {a, b};
  return tape.record(std::move(out), parents,
                     [a, b](Tape& t, std::span<const double> g) {
                       const Tensor& x = t.value(a);
                       const Tensor& y = t.value(b);
                       if (t.requires_grad(a)) {
                         auto ga = t.grad_of(a);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           ga[i] += g[i] * y[i];
                       }
                       if (t.requires_grad(b)) {
                         auto gb = t.grad_of(b);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           gb[i] += g[i] * x[i];
                       }
                     });
}

Var scale(Var a, double factor) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
  const Var parents[] = {a};
  return tape.record(std::move(out), parents,
                     [a, factor](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         ga[i] += factor * g[i];
                     });
}

Var add_scalar(Var a, double value) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += value;
  const Var parents[] = {a};
  return tape.record(std::move(out), parents,
                     [a](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     });
}

Var repeat_rows(Var row, std::size_t n) {
  Tape& tape = tape_of(row);
  require_rank2(row, "repeat_rows");
  if (row.shape()[0] != 1) {
    throw DimensionError("repeat_rows: expected a (1,c) operand, got " +
                         shape_str(row.shape()));
  }
  const std::size_t c = row.shape()[1];
  Tensor out({n, c});
  const Tensor& x = row.value();
  for (std::size_t i = 0; i < n; ++i)
    std::copy(x.data().begin(), x.data().end(), out.data().begin() + i * c);
  const Var parents[] = {row};
  return tape.record(std::move(out), parents,
                     [row, n, c](Tape& t, std::span<const double> g) {
                       auto gr = t.grad_of(row);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < c; ++j) gr[j] += g[i * c + j];
                     });
}

Var repeat_cols(Var col, std::size_t n) {
  Tape& tape = tape_of(col);
  require_rank2(col, "repeat_cols");
  if (col.shape()[1] != 1) {
    throw DimensionError("repeat_cols: expected a (r,1) operand, got " +
                         shape_str(col.shape()));
  }
  const std::size_t r = col.shape()[0];
  Tensor out({r, n});
  const Tensor& x = col.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i];
  const Var parents[] = {col};
  return tape.record(std::move(out), parents,
                     [col, r, n](Tape& t, std::span<const double> g) {
                       auto gc = t.grad_of(col);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < n; ++j) gc[i] += g[i * n + j];
                     });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  if (axis != 0 && axis != 1) throw ParameterError("concat: axis must be 0 or 1");
  Tape& tape = tape_of(parts[0]);
  std::size_t rows = 0, cols = 0;
  for (const Var& p : parts) {
    require_rank2(p, "concat");
    if (p.tape() != &tape) throw StateError("concat: operands on different tapes");
    const std::size_t r = p.shape()[0], c = p.shape()[1];
    if (axis == 0) {
      if (&p != &parts[0] && c != cols)
        throw DimensionError("concat axis 0: column mismatch " +
                             shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
      cols = c;
      rows += r;
    } else {
      if (&p != &parts[0] && r != rows)
        throw DimensionError("concat axis 1: row mismatch " +
                             shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
      rows = r;
      cols += c;
    }
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& x = p.value();
    const std::size_t r = x.shape()[0], c = x.shape()[1];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        if (axis == 0)
          out[(offset + i) * cols + j] = x[i * c + j];
        else
          out[i * cols + offset + j] = x[i * c + j];
      }
    offset += axis == 0 ? r : c;
  }
  std::vector<Var> owned(parts.begin(), parts.end());
  return tape.record(
      std::move(out), parts,
      [owned, axis, cols](Tape& t, std::span<const double> g) {
        std::size_t offset = 0;
        for (const Var& p : owned) {
          const std::size_t r = t.value(p).shape()[0], c = t.value(p).shape()[1];
          if (t.requires_grad(p)) {
            auto gp = t.grad_of(p);
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < c; ++j)
                gp[i * c + j] += axis == 0 ? g[(offset + i) * cols + j]
                                           : g[i * cols + offset + j];
          }
          offset += axis == 0 ? r : c;
        }
      });
}

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of(a);
  require_rank2(a, "slice_rows");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (begin > end || end > r) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") outside " + shape_str(a.shape()));
  }
  const Tensor& x = a.value();
  Tensor out({end - begin, c});
  std::copy(x.data().begin() + begin * c, x.data().begin() + end * c,
            out.data().begin());
  const Var parents[] = {a};
  return tape.record(std::move(out), parents,
                     [a, begin, c](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         ga[begin * c + i] += g[i];
                     });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of(a);
  require_rank2(a, "slice_cols");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (begin > end || end > c) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") outside " + shape_str(a.shape()));
  }
  const std::size_t w = end - begin;
  const Tensor& x = a.value();
  Tensor out({r, w});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = x[i * c + begin + j];
  const Var parents[] = {a};
  return tape.record(std::move(out), parents,
                     [a, begin, r, c, w](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < w; ++j)
                           ga[i * c + begin + j] += g[i * w + j];
                     });
}

Var transpose(Var a) {
  Tape& tape = tape_of(a);
  require_rank2(a, "transpose");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  const Tensor& x = a.value();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  const Var parents[] = {a};
  return tape.record(std::move(out), parents,
                     [a, r, c](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j)
                           ga[i * c + j] += g[j * r + i];
                     });
}

Var reshape(Var a, Shape shape) {
  Tape& tape = tape_of(a);
  Tensor out = a.value().reshaped(std::move(shape));
  const Var parents[] = {a};
  return tape.record(std::move(out), parents,
                     [a](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     });
}

Var relu(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  const Var parents[] = {a};
  return tape.record(std::move(out), parents,
                     [a](Tape& t, std::span<const double> g) {
                       const Tensor& x = t.value(a);
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         if (x[i] > 0.0) ga[i] += g[i];
                     });
}

Var sigmoid(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
  }
  const Var parents[] = {a};
  std::vector<double> y = out.vec();
  return tape.record(std::move(out), parents,
                     [a, y = std::move(y)](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         ga[i] += g[i] * y[i] * (1.0 - y[i]);
                     });
}

Var tanh(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  const Var parents[] = {a};
  std::vector<double> y = out.vec();
  return tape.record(std::move(out), parents,
                     [a, y = std::move(y)](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         ga[i] += g[i] * (1.0 - y[i] * y[i]);
                     });
}

Var square(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= out[i];
  const Var parents[] = {a};
  return tape.record(std::move(out), parents,
                     [a](Tape& t, std::span<const double> g) {
                       const Tensor& x = t.value(a);
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         ga[i] += 2.0 * x[i] * g[i];
                     });
}

Var softmax(Var a, int axis) {
  Tape& tape = tape_of(a);
  require_rank2(a, "softmax");
  if (axis != 0 && axis != 1) throw ParameterError("softmax: axis must be 0 or 1");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  Tensor out = a.value();
  // Iterate over lines along `axis`: stride/count describe one line.
  const std::size_t lines = axis == 1 ? r : c;
  const std::size_t len = axis == 1 ? c : r;
  const std::size_t stride = axis == 1 ? 1 : c;
  auto base = [=](std::size_t l) { return axis == 1 ? l * c : l; };
  for (std::size_t l = 0; l < lines; ++l) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, out[base(l) + i * stride]);
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      double& v = out[base(l) + i * stride];
      v = std::exp(v - mx);
      s += v;
    }
    for (std::size_t i = 0; i < len; ++i) out[base(l) + i * stride] /= s;
  }
  const Var parents[] = {a};
  std::vector<double> y = out.vec();
  return tape.record(
      std::move(out), parents,
      [a, y = std::move(y), lines, len, stride, base](Tape& t,
                                                      std::span<const double> g) {
        auto ga = t.grad_of(a);
        for (std::size_t l = 0; l < lines; ++l) {
          double dot = 0.0;
          for (std::size_t i = 0; i < len; ++i) {
            const std::size_t idx = base(l) + i * stride;
            dot += g[idx] * y[idx];
          }
          for (std::size_t i = 0; i < len; ++i) {
            const std::size_t idx = base(l) + i * stride;
            ga[idx] += y[idx] * (g[idx] - dot);
          }
        }
      });
}

Var masked_fill(Var a, const std::vector<std::uint8_t>& mask, double value) {
  Tape& tape = tape_of(a);
  if (mask.size() != a.value().size()) {
    throw DimensionError("masked_fill: mask length " + std::to_string(mask.size()) +
                         " does not match " + shape_str(a.shape()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i]) out[i] = value;
  const Var parents[] = {a};
  return tape.record(std::move(out), parents,
                     [a, mask](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         if (!mask[i]) ga[i] += g[i];
                     });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const Var parents[] = {a};
  return tape.record(Tensor::scalar(s), parents,
                     [a](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (double& v : ga) v += g[0];
                     });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum_rows(Var a) {
  Tape& tape = tape_of(a);
  require_rank2(a, "sum_rows");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  const Tensor& x = a.value();
  Tensor out({1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += x[i * c + j];
  const Var parents[] = {a};
  return tape.record(std::move(out), parents,
                     [a, r, c](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j];
                     });
}

Var mean_rows(Var a) {
  const std::size_t r = a.rows();
  if (r == 0) throw DimensionError("mean_rows of a tensor with no rows");
  return scale(sum_rows(a), 1.0 / static_cast<double>(r));
}

Var sum_cols(Var a) {
  Tape& tape = tape_of(a);
  require_rank2(a, "sum_cols");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  const Tensor& x = a.value();
  Tensor out({r, 1});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += x[i * c + j];
  const Var parents[] = {a};
  return tape.record(std::move(out), parents,
                     [a, r, c](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_of(a);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i];
                     });
}

BatchNormBuffers BatchNormBuffers::make(std::size_t channels) {
  BatchNormBuffers b;
  b.running_mean = Tensor({1, channels}, 0.0);
  b.running_var = Tensor({1, channels}, 1.0);
  return b;
}

namespace {

void check_affine(Var x, Var gamma, Var beta, std::size_t channels,
                  const char* op) {
  require_rank2(x, op);
  const Shape want{1, channels};
  if (gamma.shape() != want || beta.shape() != want) {
    throw DimensionError(std::string(op) + ": scale/shift must be " +
                         shape_str(want) + ", got " + shape_str(gamma.shape()) +
                         " and " + shape_str(beta.shape()));
  }
}

}  // namespace

Var batch_norm(Var x, Var gamma, Var beta, BatchNormBuffers& buffers,
               bool train) {
  Tape& tape = tape_of(x);
  const std::size_t n = x.shape().at(0), c = x.value().rank() == 2 ? x.shape()[1] : 0;
  check_affine(x, gamma, beta, c, "batch_norm");
  if (buffers.running_mean.size() != c) {
    throw DimensionError("batch_norm: buffers sized for " +
                         std::to_string(buffers.running_mean.size()) +
                         " channels, input has " + std::to_string(c));
  }
  const Tensor& xv = x.value();
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  std::vector<double> mu(c, 0.0), inv_std(c, 0.0);
  if (train) {
    if (n == 0) throw DimensionError("batch_norm: empty batch in train mode");
    std::vector<double> var(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) mu[j] += xv[i * c + j];
    for (double& m : mu) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double d = xv[i * c + j] - mu[j];
        var[j] += d * d;
      }
    for (std::size_t j = 0; j < c; ++j) {
      var[j] /= static_cast<double>(n);
      inv_std[j] = 1.0 / std::sqrt(var[j] + buffers.eps);
      const double unbiased =
          n > 1 ? var[j] * static_cast<double>(n) / static_cast<double>(n - 1)
                : buffers.running_var[j];
      buffers.running_mean[j] =
          (1.0 - buffers.momentum) * buffers.running_mean[j] + buffers.momentum * mu[j];
      buffers.running_var[j] =
          (1.0 - buffers.momentum) * buffers.running_var[j] + buffers.momentum * unbiased;
    }
  } else {
    for (std::size_t j = 0; j < c; ++j) {
      mu[j] = buffers.running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(buffers.running_var[j] + buffers.eps);
    }
  }
  Tensor xhat({n, c});
  Tensor out({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (xv[i * c + j] - mu[j]) * inv_std[j];
      out[i * c + j] = gv[j] * xhat[i * c + j] + bv[j];
    }
  const Var parents[] = {x, gamma, beta};
  return tape.record(
      std::move(out), parents,
      [x, gamma, beta, xhat = std::move(xhat), inv_std, n, c, train](
          Tape& t, std::span<const double> g) {
        const Tensor& gv = t.value(gamma);
        if (t.requires_grad(gamma)) {
          auto gg = t.grad_of(gamma);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * xhat[i * c + j];
        }
        if (t.requires_grad(beta)) {
          auto gb = t.grad_of(beta);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
        }
        if (!t.requires_grad(x)) return;
        auto gx = t.grad_of(x);
        if (!train) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j)
              gx[i * c + j] += g[i * c + j] * gv[j] * inv_std[j];
          return;
        }
        const double nn = static_cast<double>(n);
        for (std::size_t j = 0; j < c; ++j) {
          double s = 0.0, sx = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const double dxh = g[i * c + j] * gv[j];
            s += dxh;
            sx += dxh * xhat[i * c + j];
          }
          for (std::size_t i = 0; i < n; ++i) {
            const double dxh = g[i * c + j] * gv[j];
            gx[i * c + j] +=
                inv_std[j] / nn * (nn * dxh - s - xhat[i * c + j] * sx);
          }
        }
      });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& tape = tape_of(x);
  require_rank2(x, "layer_norm");
  const std::size_t n = x.shape()[0], c = x.shape()[1];
  check_affine(x, gamma, beta, c, "layer_norm");
  const Tensor& xv = x.value();
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor xhat({n, c});
  Tensor out({n, c});
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0, var = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xv[i * c + j];
    mu /= static_cast<double>(c);
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xv[i * c + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (xv[i * c + j] - mu) * inv_std[i];
      out[i * c + j] = gv[j] * xhat[i * c + j] + bv[j];
    }
  }
  const Var parents[] = {x, gamma, beta};
  return tape.record(
      std::move(out), parents,
      [x, gamma, beta, xhat = std::move(xhat), inv_std, n, c](
          Tape& t, std::span<const double> g) {
        const Tensor& gv = t.value(gamma);
        if (t.requires_grad(gamma)) {
          auto gg = t.grad_of(gamma);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * xhat[i * c + j];
        }
        if (t.requires_grad(beta)) {
          auto gb = t.grad_of(beta);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
        }
        if (!t.requires_grad(x)) return;
        auto gx = t.grad_of(x);
        const double cc = static_cast<double>(c);
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0.0, sx = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double dxh = g[i * c + j] * gv[j];
            s += dxh;
            sx += dxh * xhat[i * c + j];
          }
          for (std::size_t j = 0; j < c; ++j) {
            const double dxh = g[i * c + j] * gv[j];
            gx[i * c + j] += inv_std[i] / cc * (cc * dxh - s - xhat[i * c + j] * sx);
          }
        }
      });
}

Var linear(Var x, Var weight, Var bias) {
  return add(matmul(x, weight), repeat_rows(bias, x.rows()));
}

Var gru_cell(Var hidden, Var input, const GruWeights& w) {
  const std::size_t n = hidden.rows();
  if (input.rows() != n) {
    throw DimensionError("gru_cell: hidden " + shape_str(hidden.shape()) +
                         " and input " + shape_str(input.shape()) +
                         " disagree on batch size");
  }
  Var r = sigmoid(add(add(matmul(input, w.w_ir), matmul(hidden, w.w_hr)),
                      repeat_rows(w.b_r, n)));
  Var z = sigmoid(add(add(matmul(input, w.w_iz), matmul(hidden, w.w_hz)),
                      repeat_rows(w.b_z, n)));
  Var hn = linear(hidden, w.w_hn, w.b_hn);
  Var cand = tanh(add(linear(input, w.w_in, w.b_in), mul(r, hn)));
  // h' = (1 - z) * cand + z * h
  return add(cand, mul(z, sub(hidden, cand)));
}

}  // namespace ftsched::ad
