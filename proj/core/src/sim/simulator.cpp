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

#include "ftsched/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ftsched/error.hpp"

namespace ftsched::sim {

std::string_view resource_name(Resource r) {
  switch (r) {
    case Resource::kCpu: return "cpu";
    case Resource::kRam: return "ram";
    case Resource::kDisk: return "disk";
  }
  return "?";
}

std::string_view profile_name(AppProfile p) {
  switch (p) {
    case AppProfile::kComputeHeavy: return "compute";
    case AppProfile::kMemoryHeavy: return "memory";
    case AppProfile::kBalanced: return "balanced";
  }
  return "?";
}

void HostSpec::validate() const {
  for (double c : capacity) {
    if (!(c > 0.0)) throw ParameterError("host " + std::to_string(id) + " has a non-positive capacity");
  }
  if (!(power_idle > 0.0) || power_peak < power_idle) {
    throw ParameterError("host " + std::to_string(id) + " has an invalid power envelope");
  }
}

std::array<ProfileSpec, kProfiles> default_profiles() {
  return {{
      {{1.4, 0.8, 0.4}, 3.5, 7.0},  // compute heavy
      {{0.6, 2.0, 0.6}, 1.2, 3.0},  // memory heavy
      {{0.8, 1.0, 1.0}, 1.6, 3.2},  // balanced
  }};
}

void SimConfig::validate() const {
  if (hosts == 0) throw ParameterError("cluster needs at least one host");
  if (!(interval_seconds > 0.0)) throw ParameterError("interval length must be positive");
  for (const auto& p : profiles) {
    if (!(p.work_min > 0.0) || p.work_max < p.work_min)
      throw ParameterError("profile work range must be positive and ordered");
    for (double d : p.demand)
      if (d < 0.0) throw ParameterError("profile demand must be non-negative");
    if (!(p.demand[0] > 0.0)) throw ParameterError("profile cpu demand must be positive");
  }
  for (double d : slo_deadline)
    if (!(d > 0.0)) throw ParameterError("SLO deadlines must be positive");
  if (demand_noise < 0.0) throw ParameterError("demand noise must be non-negative");
  if (burst_probability < 0.0 || burst_probability > 1.0)
    throw ParameterError("burst probability must lie in [0,1]");
  if (burst_factor < 1.0) throw ParameterError("burst factor must be at least 1");
  if (migration_downtime < 0.0 || migration_downtime > 1.0)
    throw ParameterError("migration downtime must lie in [0,1]");
  for (double g : contention_exponent)
    if (!(g > 0.0)) throw ParameterError("contention exponents must be positive");
  if (label_window == 0) throw ParameterError("label window must be positive");
  if (label_kappa < 0.0) throw ParameterError("label kappa must be non-negative");
  if (!(label_cap > 0.0)) throw ParameterError("label cap must be positive");
  if (!(admission_cap > 0.0)) throw ParameterError("admission cap must be positive");
  if (!(art_max > 0.0)) throw ParameterError("ART normalization cap must be positive");
  if (art_warmup < 0) throw ParameterError("ART warmup must be non-negative");
}

std::vector<HostSpec> SimConfig::host_specs() const {
  std::vector<HostSpec> out(hosts);
  for (std::size_t i = 0; i < hosts; ++i) {
    HostSpec& h = out[i];
    h.id = static_cast<int>(i);
    if (i % 2 == 0) {
      h.capacity = {4.0, 4.0, 4.0};
      h.power_idle = 40.0;
      h.power_peak = 100.0;
    } else {
      h.capacity = {4.0, 8.0, 4.0};
      h.power_idle = 50.0;
      h.power_peak = 120.0;
    }
  }
  return out;
}

double SimConfig::fleet_peak_power() const {
  double s = 0.0;
  for (const auto& h : host_specs()) s += h.power_peak;
  return s;
}

ResourceVec NoiseSource::realize(const TaskSpec& task, int interval,
                                 const SimConfig& config) const {
  if (mode == NoiseMode::kNominal) return task.demand;
  ResourceVec out = task.demand;
  const auto id = static_cast<std::uint64_t>(task.id);
  const auto t = static_cast<std::uint64_t>(interval);
  const double cv = config.demand_noise;
  if (cv > 0.0) {
    const double s2 = std::log1p(cv * cv);
    const double s = std::sqrt(s2);
    for (std::size_t r = 0; r < kResources; ++r) {
      const double u1 = unit_from_hash(derive_seed(seed, id, t, 2 * r));
      const double u2 = unit_from_hash(derive_seed(seed, id, t, 2 * r + 1));
      const double z = std::sqrt(-2.0 * std::log1p(-u1)) *
                       std::cos(2.0 * std::numbers::pi * u2);
      out[r] *= std::exp(s * z - 0.5 * s2);
    }
  }
  if (bursts(task, interval, config)) {
    const double u = unit_from_hash(derive_seed(seed, id, t, 101));
    const auto r = std::min<std::size_t>(kResources - 1,
                                         static_cast<std::size_t>(u * kResources));
    out[r] *= config.burst_factor;
  }
  return out;
}

bool NoiseSource::bursts(const TaskSpec& task, int interval,
                         const SimConfig& config) const {
  if (mode == NoiseMode::kNominal || config.burst_probability <= 0.0) return false;
  const double u = unit_from_hash(derive_seed(
      seed, static_cast<std::uint64_t>(task.id), static_cast<std::uint64_t>(interval), 100));
  return u < config.burst_probability;
}

ClusterState initial_state(const SimConfig& config) {
  config.validate();
  ClusterState s;
  s.hosts = config.host_specs();
  s.host_usage.assign(config.hosts, ResourceVec{});
  s.art_scale = config.art_max;
  return s;
}

std::vector<TaskSpec> spawn_tasks(double lambda, int interval, Rng& rng,
                                  const SimConfig& config, int& next_id) {
  if (!(lambda >= 0.0)) throw ParameterError("arrival rate must be non-negative");
  std::vector<TaskSpec> out;
  if (lambda == 0.0) return out;
  const int count = std::poisson_distribution<int>(lambda)(rng);
  out.reserve(static_cast<std::size_t>(count));
  std::uniform_int_distribution<int> pick(0, static_cast<int>(kProfiles) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < count; ++i) {
    const auto p = static_cast<std::size_t>(pick(rng));
    const ProfileSpec& spec = config.profiles[p];
    TaskSpec task;
    task.id = next_id++;
    task.profile = static_cast<AppProfile>(p);
    task.total_work = spec.work_min + (spec.work_max - spec.work_min) * unit(rng);
    task.remaining_work = task.total_work;
    task.demand = spec.demand;
    task.usage = spec.demand;
    task.arrival_interval = interval;
    task.slo_deadline = config.slo_deadline[p];
    out.push_back(task);
  }
  return out;
}

ClusterState admit(const ClusterState& state, std::vector<TaskSpec> arrivals) {
  ClusterState out = state;
  for (auto& task : arrivals) {
    task.host = -1;
    out.next_task_id = std::max(out.next_task_id, task.id + 1);
    out.tasks.push_back(std::move(task));
    ++out.arrived;
  }
  return out;
}

std::vector<ResourceVec> nominal_load(const ClusterState& state,
                                      std::span<const int> assignment) {
  if (assignment.size() != state.tasks.size())
    throw DimensionError("assignment length does not match active task count");
  std::vector<ResourceVec> load(state.hosts.size(), ResourceVec{});
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int h = assignment[i];
    if (h < 0 || static_cast<std::size_t>(h) >= state.hosts.size())
      throw ParameterError("assignment host index out of range");
    for (std::size_t r = 0; r < kResources; ++r)
      load[h][r] += state.tasks[i].demand[r] / state.hosts[h].capacity[r];
  }
  return load;
}

StepResult step_interval(const ClusterState& state, const ScheduleMatrix& schedule,
                         const SimConfig& config, const NoiseSource& noise) {
  const std::size_t m = state.hosts.size();
  const std::size_t p = state.tasks.size();
  if (schedule.tasks() != p) {
    throw DimensionError("schedule has " + std::to_string(schedule.tasks()) +
                         " rows for " + std::to_string(p) + " active tasks");
  }
  if (schedule.hosts() != m) {
    throw DimensionError("schedule has " + std::to_string(schedule.hosts()) +
                         " columns for " + std::to_string(m) + " hosts");
  }
  if (!schedule.is_one_hot()) throw ParameterError("schedule rows must be one-hot");

  const int t = state.interval;
  const double L = config.interval_seconds;
  const std::vector<int> target = schedule.assignment();

  std::vector<ResourceVec> realized(p);
  std::vector<ResourceVec> demand(m, ResourceVec{});
  std::vector<std::uint8_t> migrated(p, 0);
  IntervalOutcome outcome;
  for (std::size_t i = 0; i < p; ++i) {
    const TaskSpec& task = state.tasks[i];
    realized[i] = noise.realize(task, t, config);
    const int h = target[i];
    for (std::size_t r = 0; r < kResources; ++r) demand[h][r] += realized[i][r];
    if (task.host >= 0 && task.host != h) {
      migrated[i] = 1;
      ++outcome.migrations;
      for (std::size_t r = 0; r < kResources; ++r) demand[task.host][r] += realized[i][r];
    }
  }

  std::vector<ResourceVec> util(m);
  std::vector<double> multiplier(m, 1.0);
  double power = 0.0;
  double peak = 0.0;
  for (std::size_t h = 0; h < m; ++h) {
    const HostSpec& host = state.hosts[h];
    for (std::size_t r = 0; r < kResources; ++r) {
      util[h][r] = demand[h][r] / host.capacity[r];
      if (demand[h][r] > host.capacity[r]) {
        const double f = std::pow(host.capacity[r] / demand[h][r],
                                  config.contention_exponent[r]);
        multiplier[h] = std::min(multiplier[h], f);
      }
    }
    power += host.power_idle +
             (host.power_peak - host.power_idle) * std::min(1.0, util[h][0]);
    peak += host.power_peak;
  }

  ClusterState next;
  next.interval = t + 1;
  next.hosts = state.hosts;
  next.host_usage = util;
  next.usage_history = state.usage_history;
  if (t > 0) next.usage_history.push_back(state.host_usage);
  while (next.usage_history.size() > config.label_window)
    next.usage_history.erase(next.usage_history.begin());
  next.completed = state.completed;
  next.next_task_id = state.next_task_id;
  next.arrived = state.arrived;
  next.tasks.reserve(p);

  double response_sum = 0.0;
  std::size_t resident = 0;
  for (std::size_t i = 0; i < p; ++i) {
    TaskSpec task = state.tasks[i];
    const int h = target[i];
    double progress = task.demand[0] * multiplier[h];
    if (migrated[i]) progress *= 1.0 - config.migration_downtime;
    if (progress >= task.remaining_work && progress > 0.0) {
      const double frac = task.remaining_work / progress;
      CompletedTask done;
      done.id = task.id;
      done.profile = task.profile;
      done.arrival_interval = task.arrival_interval;
      done.completion_interval = t;
      done.response_time = (t - task.arrival_interval + frac) * L;
      done.slo_violated = done.response_time > task.slo_deadline;
      response_sum += done.response_time;
      ++resident;
      outcome.slo_violations += done.slo_violated ? 1 : 0;
      outcome.completed.push_back(done);
      next.completed.push_back(done);
      continue;
    }
    task.remaining_work -= progress;
    // Running tasks enter the response-time average with a projection at
    // their current rate, so delaying a completion is never rewarded.
    const double rate = std::max(task.demand[0] * multiplier[h], 1e-6);
    response_sum += (t + 1 - task.arrival_interval + task.remaining_work / rate) * L;
    ++resident;
    task.usage = realized[i];
    task.host = h;
    next.tasks.push_back(task);
  }

  outcome.completions = outcome.completed.size();
  outcome.art_raw = resident ? response_sum / static_cast<double>(resident) : 0.0;
  next.art_scale = state.art_scale;
  if (t < config.art_warmup) next.art_scale = std::max(next.art_scale, outcome.art_raw);
  outcome.art = std::min(1.0, outcome.art_raw / next.art_scale);
  outcome.aec = power / peak;
  outcome.energy = power * L;
  outcome.migration_time = outcome.migrations * config.migration_downtime * L;

  HostLabels labels = label_ground_truth(next, config);
  outcome.fault_flags = std::move(labels.flags);
  outcome.fault_kinds = std::move(labels.kinds);
  return {std::move(next), std::move(outcome)};
}

HostLabels label_ground_truth(const ClusterState& state, const SimConfig& config) {
  const std::size_t m = state.host_usage.size();
  HostLabels out;
  out.flags.assign(m, 0);
  out.kinds.assign(m, 0);
  out.thresholds.assign(m, ResourceVec{});
  const std::size_t w = std::min(config.label_window, state.usage_history.size());
  const std::size_t first = state.usage_history.size() - w;
  for (std::size_t h = 0; h < m; ++h) {
    for (std::size_t r = 0; r < kResources; ++r) {
      double thr = config.label_cap;
      if (w > 0) {
        double mean = 0.0;
        for (std::size_t j = first; j < state.usage_history.size(); ++j)
          mean += state.usage_history[j][h][r];
        mean /= static_cast<double>(w);
        double var = 0.0;
        for (std::size_t j = first; j < state.usage_history.size(); ++j) {
          const double d = state.usage_history[j][h][r] - mean;
          var += d * d;
        }
        var /= static_cast<double>(w);
        thr = std::max(thr, mean + config.label_kappa * std::sqrt(var));
      }
      out.thresholds[h][r] = thr;
      if (state.host_usage[h][r] > thr) {
        out.flags[h] = 1;
        out.kinds[h] |= resource_bit(static_cast<Resource>(r));
      }
    }
  }
  return out;
}

double compute_qos(const IntervalOutcome& outcome, double alpha, double beta) {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || alpha + beta > 1.0 + 1e-12) {
    throw ParameterError("QoS weights must be non-negative and sum to at most 1");
  }
  return 1.0 - alpha * outcome.art - beta * outcome.aec;
}

double jain_fairness(std::span<const double> values) {
  if (values.empty()) throw ParameterError("fairness index of an empty list is undefined");
  double s = 0.0;
  double s2 = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) throw ParameterError("fairness index requires positive values");
    s += v;
    s2 += v * v;
  }
  return s * s / (static_cast<double>(values.size()) * s2);
}

}  // namespace ftsched::sim
