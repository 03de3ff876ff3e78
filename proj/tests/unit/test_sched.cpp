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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "ftsched/error.hpp"
#include "ftsched/sched/policies.hpp"
#include "ftsched/sched/scheduler.hpp"
#include "ftsched/sim/episode.hpp"

using namespace ftsched;
using sim::ScheduleMatrix;

namespace {

sim::TaskSpec task(int id, int host, sim::ResourceVec demand) {
  sim::TaskSpec t;
  t.id = id;
  t.host = host;
  t.demand = demand;
  t.usage = demand;
  t.total_work = t.remaining_work = 5.0;
  t.slo_deadline = 3000.0;
  return t;
}

ScheduleMatrix argmax_projection(const ScheduleMatrix& relaxed) {
  return ScheduleMatrix::from_assignment(relaxed.assignment(), relaxed.hosts());
}

}  // namespace

TEST_CASE("optimizer config validation") {
  sched::OptConfig c;
  c.iterations = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c.iterations = 5;
  c.period = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c.period = 10;
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("optimize_schedule: one logged iteration per step, ending on the last projection") {
  auto bundle = test::small_bundle();
  const auto& r = test::small_dataset()[40];
  REQUIRE(r.tasks() > 0);
  const auto s = train::make_sample(r, bundle.scaler);
  std::size_t queries = 0;
  const sched::CoSim cosim = [&](const ScheduleMatrix& d) {
    ++queries;
    CHECK(d.is_one_hot());
    return sched::CoSimResult{s.next, s.survives};
  };
  sched::OptConfig oc;
  oc.iterations = 7;
  const auto before = bundle.model.checksum();
  const auto out = sched::optimize_schedule(bundle.model, s.window, r.schedule, r.placement, cosim,
                                            argmax_projection, bundle.stats, oc);
  CHECK(bundle.model.checksum() == before);
  REQUIRE(out.trajectory.size() == 7);
  CHECK(queries == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(out.trajectory[i].iteration == i);
    CHECK(std::isfinite(out.trajectory[i].loss));
    CHECK(out.trajectory[i].decision.size() == r.tasks());
    CHECK(out.trajectory[i].prototype.size() == 8);
  }
  CHECK(out.trajectory[0].learning_rate == oc.learning_rate);
  CHECK(out.schedule.is_one_hot());
  CHECK(out.schedule.assignment() == out.trajectory.back().decision);
}

TEST_CASE("projection: a migration that fits moves, one that does not stays") {
  sim::SimConfig c;
  auto state = sim::initial_state(c);
  // Host capacities are 4 on every resource for even hosts.
  state.tasks = {task(0, 0, {3.0, 0.4, 0.4}), task(1, 2, {3.0, 0.4, 0.4}),
                 task(2, 4, {0.4, 0.4, 0.4})};
  ScheduleMatrix relaxed(3, 8);
  relaxed(0, 2) = 0.9;  // 0.75 + 0.75 cpu on host 2 does not fit
  relaxed(0, 0) = 0.1;
  relaxed(1, 2) = 1.0;  // stays
  relaxed(2, 6) = 0.6;  // fits
  relaxed(2, 4) = 0.4;
  const auto out = sched::project_to_feasible(relaxed, state, 0.8);
  CHECK(out.is_one_hot());
  CHECK(out.assignment() == std::vector<int>{0, 2, 6});
}

TEST_CASE("projection: an arrival that does not fit its target goes to a host that fits") {
  sim::SimConfig c;
  auto state = sim::initial_state(c);
  state.tasks = {task(0, 2, {3.0, 0.4, 0.4}), task(1, -1, {1.0, 0.4, 0.4})};
  ScheduleMatrix relaxed(2, 8);
  relaxed(0, 2) = 1.0;
  relaxed(1, 2) = 1.0;
  const auto out = sched::project_to_feasible(relaxed, state, 0.8);
  CHECK(out.is_one_hot());
  CHECK(out.target(0) == 2);
  CHECK(out.target(1) != 2);
  const auto load = sim::nominal_load(state, out.assignment());
  for (const auto& u : load)
    for (double v : u) CHECK(v <= 0.8 + 1e-12);
}

TEST_CASE("projection of the current placement is the identity") {
  sched::RandomPolicy p(5);
  sim::EpisodeConfig ep;
  ep.intervals = 30;
  ep.lambda = 4.0;
  const auto log = sim::run_episode(ep, p);
  for (const auto& rec : log.records) {
    std::vector<int> placed;
    auto state = rec.state;
    // Keep only tasks that already run somewhere.
    std::erase_if(state.tasks, [](const sim::TaskSpec& t) { return t.host < 0; });
    for (const auto& t : state.tasks) placed.push_back(t.host);
    const auto s = ScheduleMatrix::from_assignment(placed, 8);
    CHECK(sched::project_to_feasible(s, state, ep.sim.admission_cap) == s);
  }
}

TEST_CASE("gobi picks the best single-arrival host by exhaustive co-simulation") {
  sim::SimConfig c;
  c.hosts = 4;
  const sim::NoiseSource noise{7, sim::NoiseMode::kNominal};
  std::mt19937_64 g(12);
  std::uniform_real_distribution<double> u(0.1, 1.5);
  for (int trial = 0; trial < 40; ++trial) {
    auto state = sim::initial_state(c);
    const int running = static_cast<int>(g() % 6);
    for (int i = 0; i < running; ++i)
      state.tasks.push_back(task(i, static_cast<int>(g() % 4), {u(g), u(g), u(g)}));
    state.tasks.push_back(task(running, -1, {u(g), u(g), u(g)}));

    std::vector<int> a;
    for (const auto& t : state.tasks) a.push_back(t.host);
    double best = -std::numeric_limits<double>::infinity();
    int best_host = -1;
    for (int h = 0; h < 4; ++h) {
      a.back() = h;
      const double q = sched::cosim_qos(state, ScheduleMatrix::from_assignment(a, 4), c, noise, 0.5, 0.5);
      if (q > best) {
        best = q;
        best_host = h;
      }
    }
    const auto chosen = sched::gobi_schedule(state, c, noise, 0.5, 0.5);
    CHECK(chosen.target(state.tasks.size() - 1) == best_host);
    for (int i = 0; i < running; ++i) CHECK(chosen.target(i) == state.tasks[i].host);
  }
}

TEST_CASE("random policy is reproducible and keeps running tasks in place") {
  sim::EpisodeConfig ep;
  ep.intervals = 25;
  ep.lambda = 3.0;
  sched::RandomPolicy a(9), b(9), c(10);
  const auto la = sim::run_episode(ep, a), lb = sim::run_episode(ep, b), lc = sim::run_episode(ep, c);
  bool differs = false;
  for (std::size_t t = 0; t < la.records.size(); ++t) {
    CHECK(la.records[t].schedule == lb.records[t].schedule);
    differs = differs || !(la.records[t].schedule == lc.records[t].schedule);
    const auto& st = la.records[t].state;
    for (std::size_t i = 0; i < st.tasks.size(); ++i)
      if (st.tasks[i].host >= 0) CHECK(la.records[t].schedule.target(i) == st.tasks[i].host);
  }
  CHECK(differs);
}

TEST_CASE("reactive policy leaves a cool cluster alone") {
  sim::SimConfig c;
  auto state = sim::initial_state(c);
  for (int i = 0; i < 8; ++i) state.tasks.push_back(task(i, i, {0.4, 0.4, 0.4}));
  state.host_usage.assign(8, {0.1, 0.1, 0.1});
  const auto s = sched::reactive_schedule(state, 0.9, 0.8);
  for (int i = 0; i < 8; ++i) CHECK(s.target(i) == i);

  // A hot host sheds its largest task.
  state.tasks.push_back(task(8, 0, {1.2, 0.4, 0.4}));
  state.host_usage[0] = {0.95, 0.2, 0.2};
  const auto hot = sched::reactive_schedule(state, 0.9, 0.8);
  CHECK(hot.target(8) != 0);
  CHECK(hot.target(0) == 0);
}

TEST_CASE("DeepFT policy: trajectories, and fine-tuning off leaves the model bit-identical") {
  sched::DeepFtConfig dc;
  dc.opt.iterations = 3;
  dc.pot.n_init = 50;
  dc.fine_tune = false;
  sim::EpisodeConfig ep;
  ep.intervals = 6;
  ep.lambda = 2.0;

  const auto& bundle = test::small_bundle();
  sched::DeepFtPolicy frozen(bundle, dc);
  const auto log = sim::run_episode(ep, frozen);
  CHECK(frozen.model().checksum() == bundle.model.checksum());
  CHECK(frozen.model().state() == bundle.model.state());
  CHECK(frozen.stats() == bundle.stats);
  REQUIRE(frozen.intervals().size() == 6);
  for (std::size_t t = 0; t < 6; ++t) {
    const auto& iv = frozen.intervals()[t];
    CHECK_FALSE(iv.tune.applied);
    if (log.records[t].state.tasks.empty()) continue;
    CHECK(iv.trajectory.size() == 3);
    CHECK(log.records[t].schedule.assignment() == iv.trajectory.back().decision);
  }

  dc.fine_tune = true;
  sched::DeepFtPolicy tuned(bundle, dc);
  sim::run_episode(ep, tuned);
  CHECK(tuned.model().checksum() != bundle.model.checksum());
}
