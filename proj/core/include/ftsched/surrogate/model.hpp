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

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ftsched/autodiff/ops.hpp"
#include "ftsched/autodiff/optim.hpp"
#include "ftsched/autodiff/tape.hpp"

namespace ftsched::model {

struct ModelConfig {
  std::size_t hosts = 8;     // m
  std::size_t features = 3;  // n
  std::size_t window = 5;    // k
  std::size_t hidden = 32;   // d
  std::size_t heads = 4;     // h
  std::size_t proto = 8;     // d_p
  std::size_t rounds = 2;    // r
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Directed host graph implied by a decision: edge j -> i when a task placed on
// host j targets host i != j. Targets are row argmaxes, so a relaxed schedule
// yields the graph of its discretization.
struct MigrationGraph {
  std::size_t hosts = 0;
  std::vector<std::pair<int, int>> edges;  // (from, to), sorted, unique

  // Row i lists the in-neighbours of host i: adjacency(i, j) = 1 iff j -> i.
  ad::Tensor in_adjacency() const;
};

// `placement` holds the current host of every task row (-1 for tasks not yet
// placed, which never contribute edges). `schedule` is p x m, row-major.
MigrationGraph build_migration_graph(std::span<const double> schedule, std::size_t hosts,
                                     std::span<const int> placement);

struct Inputs {
  ad::Var window;    // (m+p, n*k), normalized, feature-major then time
  ad::Var schedule;  // (p, m), row-stochastic or one-hot
  std::span<const int> placement;
};

struct Outputs {
  ad::Var reconstruction;  // (m+p, n*k), in (0,1)
  ad::Var prototype;       // (1, d_p), in (0,1)
  ad::Var pooled;          // (1, d), pooled decision encoding
  ad::Tensor time_attention;      // (m+p, k), softmax over steps
  ad::Tensor decision_attention;  // (p, p), averaged over heads
  std::map<std::string, ad::Var> params;  // leaves bound for this pass
};

class Surrogate {
 public:
  Surrogate() = default;
  explicit Surrogate(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  ad::ParamMap& params() noexcept { return params_; }
  const ad::ParamMap& params() const noexcept { return params_; }
  std::size_t parameter_count() const;

  // Records the forward pass on `tape`. Parameters are bound as leaves that
  // require gradients iff `param_grads`; `train` selects batch-norm mode and
  // updates running statistics in train mode. Eval-mode passes only read the
  // model.
  Outputs forward(ad::Tape& tape, const Inputs& in, bool train, bool param_grads);

  // Same, with caller-provided leaves for every parameter name (gradient
  // checks perturb parameters through these).
  Outputs forward_with(ad::Tape& tape, const Inputs& in, bool train,
                       std::map<std::string, ad::Var> bindings);

  // Parameter gradients accumulated on `tape` for the leaves of `pass`.
  static ad::ParamMap gradients(const ad::Tape& tape, const Outputs& pass);

  // Parameters plus batch-norm running statistics.
  ad::ParamMap state() const;
  void load_state(const ad::ParamMap& state);

  void save(const std::filesystem::path& stem) const;
  static Surrogate load(const std::filesystem::path& stem);

  std::uint64_t checksum() const;

 private:
  using Bindings = std::map<std::string, ad::Var>;
  ad::Var mha(const Bindings& b, ad::Var q_in, ad::Var k_in, ad::Var v_in,
              const std::string& prefix, ad::Tensor* avg_attention) const;
  std::vector<ad::Var> time_attention(const Bindings& b,
                                      const std::vector<ad::Var>& steps) const;

  ModelConfig config_;
  ad::ParamMap params_;
  ad::BatchNormBuffers bn_;
};

}  // namespace ftsched::model
