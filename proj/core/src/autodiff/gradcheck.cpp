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

#include "ftsched/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ftsched::ad {
namespace {

double evaluate(const MultiScalarFn& fn, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.constant(t));
  return fn(tape, leaves).value().item();
}

}  // namespace

GradCheckReport grad_check(const MultiScalarFn& fn,
                           const std::vector<Tensor>& inputs, double eps,
                           double tol, std::size_t stride) {
  GradCheckReport report;
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t, true));
    Var out = fn(tape, leaves);
    tape.backward(out);
    for (Var v : leaves) analytic.push_back(tape.grad(v));
  }
  std::vector<Tensor> probe = inputs;
  stride = std::max<std::size_t>(stride, 1);
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t i = 0; i < probe[k].size(); i += stride) {
      const double orig = probe[k][i];
      probe[k][i] = orig + eps;
      const double fp = evaluate(fn, probe);
      probe[k][i] = orig - eps;
      const double fm = evaluate(fn, probe);
      probe[k][i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[k][i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err =
          abs_err / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++report.checked;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err > report.max_rel_error) {
        report.max_rel_error = rel_err;
        report.worst_input = k;
        report.worst_index = i;
      }
    }
  }
  report.pass = report.max_rel_error < tol;
  return report;
}

GradCheckReport grad_check(const ScalarFn& fn, const Tensor& input, double eps,
                           double tol) {
  return grad_check(
      [&fn](Tape& tape, std::span<const Var> v) { return fn(tape, v[0]); },
      std::vector<Tensor>{input}, eps, tol);
}

}  // namespace ftsched::ad
