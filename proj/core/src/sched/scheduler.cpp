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

#include "ftsched/sched/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ftsched/autodiff/ops.hpp"
#include "ftsched/error.hpp"
#include "ftsched/train/train.hpp"

namespace ftsched::sched {

using ad::Tensor;
using ad::Var;

void OptConfig::validate() const {
  if (iterations < 1) throw ParameterError("schedule optimization needs at least one iteration");
  if (learning_rate < 0.0 || min_learning_rate < 0.0 || min_learning_rate > learning_rate)
    throw ParameterError("optimizer rates must satisfy 0 <= min <= max");
  if (period < 1) throw ParameterError("cosine period must be at least 1");
  if (!(period_mult >= 1.0)) throw ParameterError("cosine period multiplier must be >= 1");
  if (!(temperature > 0.0)) throw ParameterError("relaxation temperature must be positive");
}

Var optimization_loss(Var next, Var predicted, Var prototype, Var mask,
                      const detect::ClassStats& nap) {
  if (next.shape() != predicted.shape() || mask.shape() != next.shape())
    throw DimensionError("optimization loss of " + ad::shape_str(predicted.shape()) +
                         " against " + ad::shape_str(next.shape()));
  return ad::add(detect::fault_score(next, predicted, mask), detect::proto_distance(prototype, nap));
}

namespace {

std::size_t nearest_class(std::span<const double> p, const detect::PrototypeStats& stats) {
  std::size_t best = 0;
  double best_d = detect::proto_distance(p, stats.classes[0]);
  for (std::size_t i = 1; i < stats.classes.size(); ++i) {
    const double d = detect::proto_distance(p, stats.classes[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

OptResult optimize_schedule(model::Surrogate& model, const Tensor& window,
                            const sim::ScheduleMatrix& init, std::span<const int> placement,
                            const CoSim& cosim, const Projection& project,
                            const detect::PrototypeStats& stats, const OptConfig& config) {
  config.validate();
  stats.validate();
  const std::size_t p = init.tasks(), m = init.hosts();
  if (m != model.config().hosts) throw DimensionError("decision width differs from model hosts");
  if (placement.size() != p) throw DimensionError("placement length differs from decision rows");

  Tensor logits({p, m});
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = config.init_logit * init.data()[i];
  ad::Adam optimizer;
  const ad::CosineWarmRestarts schedule(config.learning_rate, config.min_learning_rate,
                                        config.period, config.period_mult);
  const std::size_t cols = window.cols();

  OptResult result;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    ad::Tape tape;
    const Var z = tape.leaf(logits, p > 0);
    const Var relaxed = p > 0 ? ad::softmax(ad::scale(z, 1.0 / config.temperature), 1) : z;
    const sim::ScheduleMatrix discrete =
        project(sim::ScheduleMatrix(p, m, relaxed.value().vec()));
    CoSimResult sim_next = cosim(discrete);
    if (sim_next.next.shape() != window.shape())
      throw DimensionError("co-simulated window " + ad::shape_str(sim_next.next.shape()) +
                           " for window " + ad::shape_str(window.shape()));

    const auto out = model.forward(tape, {tape.constant(window), relaxed, placement},
                                   /*train=*/false, /*param_grads=*/false);
    const Var mask = tape.constant(train::row_mask(sim_next.survives, cols));
    const Var loss = optimization_loss(tape.constant(std::move(sim_next.next)),
                                       out.reconstruction, out.prototype, mask, stats.classes[0]);

    IterationLog log;
    log.iteration = it;
    log.loss = loss.value().item();
    log.prototype = out.prototype.value().vec();
    log.nap_distance = detect::proto_distance(log.prototype, stats.classes[0]);
    log.chosen_class = nearest_class(log.prototype, stats);
    log.learning_rate = schedule.lr(it);
    log.decision = discrete.assignment();
    result.trajectory.push_back(std::move(log));
    result.schedule = discrete;

    if (p > 0 && std::isfinite(result.trajectory.back().loss)) {
      tape.backward(loss);
      optimizer.step("logits", logits, tape.grad(z), schedule.lr(it));
    }
  }
  return result;
}

sim::ScheduleMatrix project_to_feasible(const sim::ScheduleMatrix& relaxed,
                                        std::span<const int> placement,
                                        std::span<const sim::ResourceVec> demand,
                                        std::span<const sim::HostSpec> hosts, double cap) {
  if (!(cap > 0.0)) throw ParameterError("admission cap must be positive");
  const std::size_t p = relaxed.tasks(), m = hosts.size();
  if (relaxed.hosts() != m) throw DimensionError("decision width differs from host count");
  if (placement.size() != p || demand.size() != p)
    throw DimensionError("projection needs a placement and a demand per task");

  std::vector<sim::ResourceVec> load(m, sim::ResourceVec{});
  auto add = [&](int h, std::size_t task) {
    for (std::size_t r = 0; r < sim::kResources; ++r)
      load[h][r] += demand[task][r] / hosts[h].capacity[r];
  };
  auto fits = [&](int h, std::size_t task) {
    for (std::size_t r = 0; r < sim::kResources; ++r)
      if (load[h][r] + demand[task][r] / hosts[h].capacity[r] > cap + 1e-12) return false;
    return true;
  };
  auto utilization = [&](int h) { return *std::max_element(load[h].begin(), load[h].end()); };
  for (std::size_t i = 0; i < p; ++i) {
    if (placement[i] >= static_cast<int>(m)) throw DimensionError("placement outside the cluster");
    if (placement[i] >= 0) add(placement[i], i);
  }

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> confidence(p);
  for (std::size_t i = 0; i < p; ++i) {
    const auto row = relaxed.row(i);
    confidence[i] = *std::max_element(row.begin(), row.end());
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return confidence[a] > confidence[b]; });

  std::vector<int> assignment(p, 0);
  for (std::size_t i : order) {
    const int target = relaxed.target(i);
    const int current = placement[i];
    if (current >= 0) {
      if (target != current && fits(target, i)) {
        assignment[i] = target;
        add(target, i);
      } else {
        assignment[i] = current;
      }
      continue;
    }
    int chosen = target;
    if (!fits(target, i)) {
      int best_fit = -1, best_any = 0;
      for (int h = 0; h < static_cast<int>(m); ++h) {
        if (fits(h, i) && (best_fit < 0 || utilization(h) < utilization(best_fit))) best_fit = h;
        if (utilization(h) < utilization(best_any)) best_any = h;
      }
      chosen = best_fit >= 0 ? best_fit : best_any;
    }
    assignment[i] = chosen;
    add(chosen, i);
  }
  return sim::ScheduleMatrix::from_assignment(assignment, m);
}

sim::ScheduleMatrix project_to_feasible(const sim::ScheduleMatrix& relaxed,
                                        const sim::ClusterState& state, double cap) {
  std::vector<int> placement;
  std::vector<sim::ResourceVec> demand;
  for (const auto& t : state.tasks) {
    placement.push_back(t.host);
    demand.push_back(t.demand);
  }
  return project_to_feasible(relaxed, placement, demand, state.hosts, cap);
}

FineTuner::FineTuner(FineTuneConfig config)
    : config_(config), optimizer_(ad::make_adamw(config.weight_decay)) {
  if (!(config.learning_rate >= 0.0)) throw ParameterError("fine-tune rate must be non-negative");
  if (!(config.stats_decay >= 0.0 && config.stats_decay <= 1.0))
    throw ParameterError("stats decay must lie in [0,1]");
}

FineTuneStep FineTuner::step(model::Surrogate& model, detect::PrototypeStats& stats,
                             const Tensor& window, const Tensor& schedule,
                             std::span<const int> placement, const Tensor& next,
                             std::span<const std::uint8_t> survives, double threshold) {
  ad::Tape tape;
  const auto out = model.forward(tape, {tape.constant(window), tape.constant(schedule), placement},
                                 /*train=*/false, /*param_grads=*/true);
  const Var target = tape.constant(next);
  const Var mask = tape.constant(train::row_mask(survives, next.cols()));
  const Var lr_loss = train::reconstruction_loss(out.reconstruction, target, mask);

  FineTuneStep r;
  r.score = detect::fault_score(target, out.reconstruction, mask).value().item();
  r.label = detect::fault_label(r.score, threshold);
  const std::vector<double> proto = out.prototype.value().vec();
  r.phi = detect::classify(proto, stats, r.label);
  const Var lt_loss = train::triplet_loss(out.prototype, r.phi, stats);
  r.reconstruction = lr_loss.value().item();
  r.triplet = lt_loss.value().item();
  const Var total = ad::add(lr_loss, lt_loss);
  if (!std::isfinite(total.value().item())) {
    ++skipped_;
    return r;
  }
  tape.backward(total);
  optimizer_.step(model.params(), model::Surrogate::gradients(tape, out), config_.learning_rate);
  r.applied = true;

  auto& c = stats.classes[r.phi];
  const double a = config_.stats_decay;
  for (std::size_t d = 0; d < proto.size(); ++d) {
    const double mu = a * c.mu[d] + (1.0 - a) * proto[d];
    const double e = proto[d] - mu;
    const double var = a * c.sigma[d] * c.sigma[d] + (1.0 - a) * e * e;
    c.mu[d] = mu;
    c.sigma[d] = std::max(detect::kSigmaFloor, std::sqrt(var));
  }
  return r;
}

}  // namespace ftsched::sched
