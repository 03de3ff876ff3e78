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
#include <cstdint>
#include <span>
#include <vector>

#include "ftsched/autodiff/tape.hpp"
#include "ftsched/autodiff/tensor.hpp"

// Differentiable primitives. Every operand is a rank-2 tensor; scalars are
// (1,1). There is no implicit broadcasting: use repeat_rows / repeat_cols.
// Shape mismatches raise ftsched::DimensionError naming both shapes.
namespace ftsched::ad {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double value);

// (1,c) -> (n,c)
Var repeat_rows(Var row, std::size_t n);
// (r,1) -> (r,n)
Var repeat_cols(Var col, std::size_t n);

// axis 0 stacks rows, axis 1 stacks columns.
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var transpose(Var a);
Var reshape(Var a, Shape shape);

// ReLU subgradient at 0 is 0.
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var square(Var a);

Var softmax(Var a, int axis);

// Entries with mask != 0 are replaced by `value` and receive no gradient.
Var masked_fill(Var a, const std::vector<std::uint8_t>& mask, double value);

// Reductions.
Var sum(Var a);
Var mean(Var a);
Var sum_rows(Var a);   // (r,c) -> (1,c)
Var mean_rows(Var a);  // (r,c) -> (1,c)
Var sum_cols(Var a);   // (r,c) -> (r,1)

// Running statistics of a batch-norm layer. Only touched in train mode.
struct BatchNormBuffers {
  Tensor running_mean;  // (1,C)
  Tensor running_var;   // (1,C)
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormBuffers make(std::size_t channels);
};

// Normalizes each column over the rows of x: (N,C). Train mode uses batch
// statistics and updates `buffers`; eval mode uses the frozen running stats.
Var batch_norm(Var x, Var gamma, Var beta, BatchNormBuffers& buffers,
               bool train);

// Normalizes each row of x over its columns.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

// x (N,in) * weight (in,out) + bias (1,out)
Var linear(Var x, Var weight, Var bias);

struct GruWeights {
  Var w_ir, w_iz, w_in;  // (in,d)
  Var w_hr, w_hz, w_hn;  // (d,d)
  Var b_r, b_z, b_in, b_hn;  // (1,d)
};

// Standard gated recurrent unit update; returns the new hidden state (N,d).
Var gru_cell(Var hidden, Var input, const GruWeights& w);

}  // namespace ftsched::ad
