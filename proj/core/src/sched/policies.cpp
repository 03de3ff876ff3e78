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

#include "ftsched/sched/policies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "ftsched/error.hpp"

namespace ftsched::sched {

namespace {

using Load = std::vector<sim::ResourceVec>;

Load nominal_loads(const sim::ClusterState& state) {
  Load load(state.hosts.size(), sim::ResourceVec{});
  for (const auto& t : state.tasks)
    if (t.host >= 0)
      for (std::size_t r = 0; r < sim::kResources; ++r)
        load[t.host][r] += t.demand[r] / state.hosts[t.host].capacity[r];
  return load;
}

bool fits(const Load& load, const sim::ClusterState& state, int h, const sim::TaskSpec& task,
          double cap) {
  for (std::size_t r = 0; r < sim::kResources; ++r)
    if (load[h][r] + task.demand[r] / state.hosts[h].capacity[r] > cap + 1e-12) return false;
  return true;
}

void add(Load& load, const sim::ClusterState& state, int h, const sim::TaskSpec& task) {
  for (std::size_t r = 0; r < sim::kResources; ++r)
    load[h][r] += task.demand[r] / state.hosts[h].capacity[r];
}

double peak(const sim::ResourceVec& v) { return *std::max_element(v.begin(), v.end()); }

// Least utilized host that fits `task`, else the least utilized one.
int least_utilized(const Load& load, const sim::ClusterState& state, const sim::TaskSpec& task,
                   double cap, int exclude = -1) {
  int best_fit = -1, best_any = -1;
  for (int h = 0; h < static_cast<int>(load.size()); ++h) {
    if (h == exclude) continue;
    if (best_any < 0 || peak(load[h]) < peak(load[best_any])) best_any = h;
    if (fits(load, state, h, task, cap) && (best_fit < 0 || peak(load[h]) < peak(load[best_fit])))
      best_fit = h;
  }
  return best_fit >= 0 ? best_fit : best_any;
}

std::vector<int> current_assignment(const sim::ClusterState& state) {
  std::vector<int> a;
  a.reserve(state.tasks.size());
  for (const auto& t : state.tasks) a.push_back(t.host);
  return a;
}

}  // namespace

sim::ScheduleMatrix random_schedule(const sim::ClusterState& state, Rng& rng, double cap) {
  const int m = static_cast<int>(state.hosts.size());
  Load load = nominal_loads(state);
  std::vector<int> a = current_assignment(state);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] >= 0) continue;
    std::vector<int> options;
    for (int h = 0; h < m; ++h)
      if (fits(load, state, h, state.tasks[i], cap)) options.push_back(h);
    if (options.empty()) {
      a[i] = least_utilized(load, state, state.tasks[i], cap);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
      a[i] = options[pick(rng)];
    }
    add(load, state, a[i], state.tasks[i]);
  }
  return sim::ScheduleMatrix::from_assignment(a, state.hosts.size());
}

sim::ScheduleMatrix reactive_schedule(const sim::ClusterState& state, double threshold,
                                      double cap) {
  Load load = nominal_loads(state);
  std::vector<int> a = current_assignment(state);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] >= 0) continue;
    a[i] = least_utilized(load, state, state.tasks[i], cap);
    add(load, state, a[i], state.tasks[i]);
  }
  for (int h = 0; h < static_cast<int>(state.hosts.size()); ++h) {
    if (h >= static_cast<int>(state.host_usage.size()) || !(peak(state.host_usage[h]) > threshold))
      continue;
    int largest = -1;
    double largest_demand = -1.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (state.tasks[i].host != h || a[i] != h) continue;
      double d = 0.0;
      for (std::size_t r = 0; r < sim::kResources; ++r)
        d = std::max(d, state.tasks[i].demand[r] / state.hosts[h].capacity[r]);
      if (d > largest_demand) {
        largest_demand = d;
        largest = static_cast<int>(i);
      }
    }
    if (largest < 0) continue;
    const auto& task = state.tasks[largest];
    const int target = least_utilized(load, state, task, cap, h);
    if (target >= 0 && fits(load, state, target, task, cap)) {
      a[largest] = target;
      add(load, state, target, task);
    }
  }
  return sim::ScheduleMatrix::from_assignment(a, state.hosts.size());
}

double cosim_qos(const sim::ClusterState& state, const sim::ScheduleMatrix& schedule,
                 const sim::SimConfig& config, const sim::NoiseSource& noise, double alpha,
                 double beta) {
  const auto step = sim::step_interval(state, schedule, config, noise);
  return sim::compute_qos(step.outcome, alpha, beta);
}

sim::ScheduleMatrix gobi_schedule(const sim::ClusterState& state, const sim::SimConfig& config,
                                  const sim::NoiseSource& noise, double alpha, double beta) {
  const std::size_t m = state.hosts.size();
  std::vector<int> a = current_assignment(state);
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] < 0) pending.push_back(i);
  if (pending.empty()) return sim::ScheduleMatrix::from_assignment(a, m);

  // Trial state without the undecided arrivals; the completed list does not
  // influence a step, so it is dropped to keep the copies small.
  sim::ClusterState trial = state;
  trial.completed.clear();
  trial.tasks.clear();
  std::vector<int> trial_assignment;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] >= 0) {
      trial.tasks.push_back(state.tasks[i]);
      trial_assignment.push_back(a[i]);
    }
  }
  for (std::size_t i : pending) {
    trial.tasks.push_back(state.tasks[i]);
    trial_assignment.push_back(0);
    int best = 0;
    double best_qos = -std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < m; ++h) {
      trial_assignment.back() = static_cast<int>(h);
      const double q = cosim_qos(trial, sim::ScheduleMatrix::from_assignment(trial_assignment, m),
                                 config, noise, alpha, beta);
      if (q > best_qos) {
        best_qos = q;
        best = static_cast<int>(h);
      }
    }
    trial_assignment.back() = best;
    a[i] = best;
  }
  return sim::ScheduleMatrix::from_assignment(a, m);
}

sim::ScheduleMatrix RandomPolicy::decide(const sim::DecisionContext& ctx) {
  Rng rng(derive_seed(seed_, hash_label("random-policy"),
                      static_cast<std::uint64_t>(ctx.state.interval)));
  return random_schedule(ctx.state, rng, ctx.config.sim.admission_cap);
}

sim::ScheduleMatrix ReactivePolicy::decide(const sim::DecisionContext& ctx) {
  return reactive_schedule(ctx.state, threshold_, ctx.config.sim.admission_cap);
}

sim::ScheduleMatrix GobiPolicy::decide(const sim::DecisionContext& ctx) {
  return gobi_schedule(ctx.state, ctx.config.sim, ctx.config.planning_noise(), alpha_, beta_);
}

DeepFtPolicy::DeepFtPolicy(train::TrainResult bundle, DeepFtConfig config)
    : bundle_(std::move(bundle)), config_(config), tuner_(config.tune) {
  config_.opt.validate();
  config_.pot.validate();
  bundle_.stats.validate();
  if (!bundle_.scaler.fitted()) throw StateError("DeepFT needs the scaler of its training data");
  pot_ = detect::warm_pot(bundle_.calibration.scores, config_.pot);
}

ad::Tensor DeepFtPolicy::normalized(const ad::Tensor& raw) const {
  const auto& s = raw.shape();
  return bundle_.scaler.normalize(raw).reshaped({s[0], s[1] * s[2]});
}

sim::ScheduleMatrix DeepFtPolicy::decide(const sim::DecisionContext& ctx) {
  const std::size_t k = bundle_.model.config().window;
  const std::size_t m = ctx.state.hosts.size();
  history_.push_back(telemetry::observe(ctx.state));
  const std::size_t idx = history_.size() - 1;
  window_ = normalized(telemetry::build_window(history_, idx, k));
  placement_ = current_assignment(ctx.state);

  // Warm start: running tasks keep their previous decision (their current
  // host); arrivals start on a random host.
  Rng rng(derive_seed(config_.seed, hash_label("deepft-init"),
                      static_cast<std::uint64_t>(ctx.state.interval)));
  std::uniform_int_distribution<int> any_host(0, static_cast<int>(m) - 1);
  std::vector<int> init = placement_;
  for (int& h : init)
    if (h < 0) h = any_host(rng);

  const sim::NoiseSource planning = ctx.config.planning_noise();
  const CoSim cosim = [&](const sim::ScheduleMatrix& s) {
    const auto step = sim::step_interval(ctx.state, s, ctx.config.sim, planning);
    auto aligned = telemetry::build_next_window(history_, idx,
                                                telemetry::observe(step.next, true), k);
    return CoSimResult{normalized(aligned.window), std::move(aligned.survives)};
  };
  const Projection project = [&](const sim::ScheduleMatrix& r) {
    return project_to_feasible(r, ctx.state, ctx.config.sim.admission_cap);
  };

  const auto start = std::chrono::steady_clock::now();
  OptResult res = optimize_schedule(bundle_.model, window_, sim::ScheduleMatrix::from_assignment(init, m),
                                    placement_, cosim, project, bundle_.stats, config_.opt);
  const auto stop = std::chrono::steady_clock::now();

  DeepFtInterval rec;
  rec.interval = ctx.state.interval;
  rec.decision_seconds = std::chrono::duration<double>(stop - start).count();
  {
    ad::Tape tape;
    const ad::Tensor s({res.schedule.tasks(), m}, res.schedule.data());
    const auto out = bundle_.model.forward(
        tape, {tape.constant(window_), tape.constant(s), placement_}, false, false);
    rec.time_attention = out.time_attention;
    rec.decision_attention = out.decision_attention;
  }
  rec.trajectory = std::move(res.trajectory);
  intervals_.push_back(std::move(rec));
  return res.schedule;
}

void DeepFtPolicy::observe(const sim::DecisionContext& ctx, const sim::ScheduleMatrix& decision,
                           const sim::StepResult& result) {
  (void)ctx;
  if (!config_.fine_tune || intervals_.empty()) return;
  const std::size_t k = bundle_.model.config().window;
  auto aligned = telemetry::build_next_window(history_, history_.size() - 1,
                                              telemetry::observe(result.next, true), k);
  const ad::Tensor s({decision.tasks(), decision.hosts()}, decision.data());
  const double threshold = pot_ ? pot_->threshold() : std::numeric_limits<double>::infinity();
  auto& tune = intervals_.back().tune;
  tune = tuner_.step(bundle_.model, bundle_.stats, window_, s, placement_,
                     normalized(aligned.window), aligned.survives, threshold);
  // The online score stream keeps the POT current.
  if (pot_ && std::isfinite(tune.score)) pot_->update(tune.score);
}

}  // namespace ftsched::sched
