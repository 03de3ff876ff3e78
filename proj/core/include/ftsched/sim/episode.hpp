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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ftsched/sim/schedule.hpp"
#include "ftsched/sim/simulator.hpp"
#include "ftsched/sim/types.hpp"

namespace ftsched::sim {

struct EpisodeConfig {
  SimConfig sim;
  double lambda = 5.0;
  int intervals = 100;
  std::uint64_t seed = 1;
  NoiseMode noise = NoiseMode::kRealized;

  void validate() const;
  NoiseSource noise_source() const;
  NoiseSource planning_noise() const { return {noise_source().seed, NoiseMode::kNominal}; }
};

struct DecisionContext {
  const ClusterState& state;  // after this interval's arrivals
  const EpisodeConfig& config;
  std::size_t arrivals = 0;   // trailing tasks in state.tasks that are new
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual ScheduleMatrix decide(const DecisionContext& ctx) = 0;
  // Called after the decision was executed.
  virtual void observe(const DecisionContext& ctx, const ScheduleMatrix& decision,
                       const StepResult& result) {
    (void)ctx;
    (void)decision;
    (void)result;
  }
};

class FunctionPolicy final : public Policy {
 public:
  using Fn = std::function<ScheduleMatrix(const DecisionContext&)>;
  FunctionPolicy(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name() const override { return name_; }
  ScheduleMatrix decide(const DecisionContext& ctx) override { return fn_(ctx); }

 private:
  std::string name_;
  Fn fn_;
};

struct IntervalRecord {
  ClusterState state;  // pre-decision, arrivals admitted
  std::size_t arrivals = 0;
  ScheduleMatrix schedule;
  IntervalOutcome outcome;
};

struct EpisodeLog {
  EpisodeConfig config;
  std::string policy;
  std::vector<IntervalRecord> records;
  ClusterState final_state;
};

// Per interval: spawn, ask the policy, step, notify. Throws DimensionError
// naming the policy and interval when the decision has the wrong shape.
EpisodeLog run_episode(const EpisodeConfig& config, Policy& policy);

// Directory with `meta` and `trace.csv`. Host utilization columns are
// host-major, resource-minor (h0_cpu, h0_ram, h0_disk, h1_cpu, ...). Task
// lists and the flattened schedule (row-major, tasks x hosts) are
// ';'-separated inside a single field.
void write_trace(const std::filesystem::path& dir, const EpisodeLog& log);

struct TraceRow {
  int interval = 0;
  std::size_t arrivals = 0;
  std::vector<double> host_util;  // m * 3
  std::vector<int> task_ids;
  std::vector<double> task_usage;  // p * 3
  std::vector<double> schedule;    // p * m
  double art = 0.0, aec = 0.0, art_raw = 0.0, energy = 0.0;
  std::size_t completions = 0, slo_violations = 0, migrations = 0;
  double migration_time = 0.0;
  std::vector<int> fault_flags;
  std::vector<int> fault_kinds;
};

struct Trace {
  std::map<std::string, std::string> meta;
  std::vector<TraceRow> rows;
};

Trace read_trace(const std::filesystem::path& dir);
TraceRow trace_row(const IntervalRecord& record);

}  // namespace ftsched::sim
