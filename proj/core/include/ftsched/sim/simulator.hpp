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

#include <array>
#include <cstdint>
#include <vector>

#include "ftsched/rng.hpp"
#include "ftsched/sim/schedule.hpp"
#include "ftsched/sim/types.hpp"

namespace ftsched::sim {

struct ProfileSpec {
  ResourceVec demand{};  // nominal units per interval
  double work_min = 1.0;
  double work_max = 1.0;
};

std::array<ProfileSpec, kProfiles> default_profiles();

struct SimConfig {
  std::size_t hosts = 8;
  double interval_seconds = 300.0;
  std::array<ProfileSpec, kProfiles> profiles = default_profiles();
  // Per-profile deadlines (s). Overwritten by SLO calibration in the harness.
  std::array<double, kProfiles> slo_deadline{3000.0, 3000.0, 3000.0};

  double demand_noise = 0.05;        // log-normal coefficient of variation
  double burst_probability = 0.001;  // per task and interval
  double burst_factor = 6.0;         // multiplier on one resource
  double migration_downtime = 0.5;   // fraction of an interval's progress lost
  // Nominal utilization a placement may bring a host to on any resource;
  // the margin below label_cap absorbs demand noise.
  double admission_cap = 0.8;
  // Throughput multiplier per resource is min(1, cap/demand)^exponent;
  // memory overcommit swaps, so it degrades quadratically.
  ResourceVec contention_exponent{1.0, 2.0, 1.0};

  std::size_t label_window = 5;
  double label_kappa = 3.0;
  double label_cap = 0.9;

  double art_max = 1500.0;  // initial response-time normalization cap (s)
  int art_warmup = 10;      // intervals during which the cap may still grow

  void validate() const;
  // Alternating small (4 RAM) and large (8 RAM) hosts.
  std::vector<HostSpec> host_specs() const;
  double fleet_peak_power() const;
};

enum class NoiseMode : std::uint8_t {
  kRealized,  // demand noise and bursts keyed by (seed, task, interval)
  kNominal,   // every task uses its nominal demand
};

// Counter-based source of per-task demand perturbations. Realizations do not
// depend on the order or number of queries, so different policies and
// co-simulated branches see identical workloads.
struct NoiseSource {
  std::uint64_t seed = 0;
  NoiseMode mode = NoiseMode::kRealized;

  ResourceVec realize(const TaskSpec& task, int interval,
                      const SimConfig& config) const;
  bool bursts(const TaskSpec& task, int interval, const SimConfig& config) const;
};

struct StepResult {
  ClusterState next;
  IntervalOutcome outcome;
};

ClusterState initial_state(const SimConfig& config);

// Poisson(lambda) arrivals with profiles drawn uniformly; ids continue from
// next_id, which is advanced.
std::vector<TaskSpec> spawn_tasks(double lambda, int interval, Rng& rng,
                                  const SimConfig& config, int& next_id);

// Appends arrivals (unplaced) to a copy of `state`.
ClusterState admit(const ClusterState& state, std::vector<TaskSpec> arrivals);

// Executes one interval under `schedule` (one-hot, one row per active task in
// state order). Pure: the input state is not modified.
StepResult step_interval(const ClusterState& state, const ScheduleMatrix& schedule,
                         const SimConfig& config, const NoiseSource& noise);

struct HostLabels {
  std::vector<std::uint8_t> flags;
  std::vector<ResourceMask> kinds;
  std::vector<ResourceVec> thresholds;
};

// A host resource is faulty when its utilization exceeds
// max(mean + kappa * std, cap) of its own previous `label_window` values.
HostLabels label_ground_truth(const ClusterState& state, const SimConfig& config);

// 1 - alpha * ART - beta * AEC; throws ParameterError unless alpha, beta >= 0
// and alpha + beta <= 1.
double compute_qos(const IntervalOutcome& outcome, double alpha, double beta);

// (sum x)^2 / (n * sum x^2); throws ParameterError on an empty list or a
// non-positive value.
double jain_fairness(std::span<const double> values);

// Utilization a host would see from the nominal demand of the tasks assigned
// to it.
std::vector<ResourceVec> nominal_load(const ClusterState& state,
                                      std::span<const int> assignment);

}  // namespace ftsched::sim
