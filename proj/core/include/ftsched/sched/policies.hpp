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
#include <optional>
#include <string>
#include <vector>

#include "ftsched/rng.hpp"
#include "ftsched/sched/scheduler.hpp"
#include "ftsched/sim/episode.hpp"
#include "ftsched/telemetry/window.hpp"
#include "ftsched/train/train.hpp"

namespace ftsched::sched {

// A host fits a task when its nominal utilization stays at or below `cap`
// on every resource.

// Uniformly random host that fits each new task (the least utilized host
// when none fits); running tasks stay.
sim::ScheduleMatrix random_schedule(const sim::ClusterState& state, Rng& rng, double cap = 0.8);

// New tasks go to the least utilized host that fits them. Every host whose
// last observed utilization exceeds `threshold` on some resource sends its
// largest task to the least utilized host that fits it.
sim::ScheduleMatrix reactive_schedule(const sim::ClusterState& state, double threshold = 0.9,
                                      double cap = 0.8);

// Greedy one-interval search: new tasks in order, each on the host whose
// co-simulated next interval has the highest QoS given the tasks placed so
// far. Running tasks stay; undecided new tasks are left out of the trial.
sim::ScheduleMatrix gobi_schedule(const sim::ClusterState& state, const sim::SimConfig& config,
                                  const sim::NoiseSource& noise, double alpha, double beta);

// QoS of executing `schedule` on `state` for one interval.
double cosim_qos(const sim::ClusterState& state, const sim::ScheduleMatrix& schedule,
                 const sim::SimConfig& config, const sim::NoiseSource& noise, double alpha,
                 double beta);

class RandomPolicy final : public sim::Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  sim::ScheduleMatrix decide(const sim::DecisionContext& ctx) override;

 private:
  std::uint64_t seed_;
};

class ReactivePolicy final : public sim::Policy {
 public:
  explicit ReactivePolicy(double threshold = 0.9) : threshold_(threshold) {}
  std::string name() const override { return "reactive_threshold"; }
  sim::ScheduleMatrix decide(const sim::DecisionContext& ctx) override;

 private:
  double threshold_;
};

class GobiPolicy final : public sim::Policy {
 public:
  GobiPolicy(double alpha, double beta) : alpha_(alpha), beta_(beta) {}
  std::string name() const override { return "gobi_ref"; }
  sim::ScheduleMatrix decide(const sim::DecisionContext& ctx) override;

 private:
  double alpha_, beta_;
};

struct DeepFtConfig {
  OptConfig opt;
  FineTuneConfig tune;
  bool fine_tune = true;
  detect::PotConfig pot;
  std::uint64_t seed = 1;
};

// What the DeepFT policy did at one interval.
struct DeepFtInterval {
  int interval = 0;
  std::vector<IterationLog> trajectory;
  ad::Tensor time_attention;      // (m+p, k) for the executed decision
  ad::Tensor decision_attention;  // (p, p)
  double decision_seconds = 0.0;
  FineTuneStep tune;
};

// Closed loop: optimize the decision against the surrogate with the
// co-simulator in the loop, then fine-tune on the observed transition.
class DeepFtPolicy final : public sim::Policy {
 public:
  DeepFtPolicy(train::TrainResult bundle, DeepFtConfig config);

  std::string name() const override { return "deepft"; }
  sim::ScheduleMatrix decide(const sim::DecisionContext& ctx) override;
  void observe(const sim::DecisionContext& ctx, const sim::ScheduleMatrix& decision,
               const sim::StepResult& result) override;

  const std::vector<DeepFtInterval>& intervals() const noexcept { return intervals_; }
  const model::Surrogate& model() const noexcept { return bundle_.model; }
  const detect::PrototypeStats& stats() const noexcept { return bundle_.stats; }

 private:
  ad::Tensor normalized(const ad::Tensor& raw) const;

  train::TrainResult bundle_;
  DeepFtConfig config_;
  FineTuner tuner_;
  std::optional<detect::Pot> pot_;  // warmed on the calibration scores
  std::vector<telemetry::StateMatrix> history_;
  ad::Tensor window_;  // normalized, flattened window of the current decision
  std::vector<int> placement_;
  std::vector<DeepFtInterval> intervals_;
};

}  // namespace ftsched::sched
