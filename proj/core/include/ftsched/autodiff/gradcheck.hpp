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

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ftsched/autodiff/tape.hpp"

namespace ftsched::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool pass = false;
};

// Scalar-valued function of several leaves recorded on the given tape.
using MultiScalarFn = std::function<Var(Tape&, std::span<const Var>)>;
using ScalarFn = std::function<Var(Tape&, Var)>;

// Compares reverse-mode gradients with central differences of step `eps`.
// Relative error is |a - n| / max(|a|, |n|, 1e-6). Passes iff the maximum
// stays below `tol`. `stride` > 1 checks every stride-th coordinate only.
GradCheckReport grad_check(const MultiScalarFn& fn,
                           const std::vector<Tensor>& inputs, double eps,
                           double tol, std::size_t stride = 1);

GradCheckReport grad_check(const ScalarFn& fn, const Tensor& input, double eps,
                           double tol);

}  // namespace ftsched::ad
