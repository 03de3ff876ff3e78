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
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ftsched::sim {

inline constexpr std::size_t kResources = 3;  // cpu, ram, disk
inline constexpr std::size_t kProfiles = 3;

using ResourceVec = std::array<double, kResources>;

enum class Resource : std::uint8_t { kCpu = 0, kRam = 1, kDisk = 2 };

// Bit set over Resource.
using ResourceMask = std::uint8_t;
constexpr ResourceMask resource_bit(Resource r) {
  return static_cast<ResourceMask>(1u << static_cast<unsigned>(r));
}

std::string_view resource_name(Resource r);

enum class AppProfile : std::uint8_t {
  kComputeHeavy = 0,
  kMemoryHeavy = 1,
  kBalanced = 2,
};

std::string_view profile_name(AppProfile p);

struct HostSpec {
  int id = 0;
  ResourceVec capacity{};  // abstract units per interval
  double power_idle = 0.0;  // watts
  double power_peak = 0.0;  // watts

  // Throws ParameterError when a capacity is not positive or the power
  // envelope is inverted.
  void validate() const;
};

struct TaskSpec {
  int id = 0;
  AppProfile profile = AppProfile::kBalanced;
  double total_work = 0.0;      // compute units
  double remaining_work = 0.0;  // compute units
  ResourceVec demand{};         // nominal per-interval demand
  ResourceVec usage{};          // demand realized during the last interval
  int arrival_interval = 0;
  double slo_deadline = 0.0;    // seconds
  int host = -1;                // -1 until first placed
};

struct CompletedTask {
  int id = 0;
  AppProfile profile = AppProfile::kBalanced;
  int arrival_interval = 0;
  int completion_interval = 0;
  double response_time = 0.0;  // seconds
  bool slo_violated = false;
};

// Ground truth of the cluster at an interval boundary.
struct ClusterState {
  int interval = 0;
  std::vector<HostSpec> hosts;
  // Utilization (demand / capacity, may exceed 1) observed over the interval
  // that just ended.
  std::vector<ResourceVec> host_usage;
  // Previous host_usage values, oldest first, at most the labeling window.
  std::vector<std::vector<ResourceVec>> usage_history;
  // Active tasks. New arrivals carry host == -1 until the step places them.
  std::vector<TaskSpec> tasks;
  std::vector<CompletedTask> completed;  // cumulative
  int next_task_id = 0;
  std::size_t arrived = 0;  // cumulative arrivals
  double art_scale = 0.0;   // normalization cap for response times (s)

  std::size_t host_count() const noexcept { return hosts.size(); }
};

struct IntervalOutcome {
  double art = 0.0;      // normalized to [0,1]
  double aec = 0.0;      // normalized to [0,1] by fleet peak power
  double art_raw = 0.0;  // seconds; completed tasks plus projections of running ones
  double energy = 0.0;   // joules over the interval
  std::size_t completions = 0;
  std::size_t slo_violations = 0;
  std::size_t migrations = 0;
  double migration_time = 0.0;  // seconds
  std::vector<std::uint8_t> fault_flags;  // per host
  std::vector<ResourceMask> fault_kinds;  // per host
  std::vector<CompletedTask> completed;   // tasks finishing in this interval
};

}  // namespace ftsched::sim
