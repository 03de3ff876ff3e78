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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ftsched/rng.hpp"
#include "ftsched/sched/policies.hpp"
#include "ftsched/sim/episode.hpp"
#include "ftsched/surrogate/model.hpp"
#include "ftsched/telemetry/dataset.hpp"
#include "ftsched/train/train.hpp"

using namespace ftsched;

namespace {

constexpr std::size_t kHosts = 8;

struct Inputs {
  ad::Tensor window;
  ad::Tensor schedule;
  std::vector<int> placement;
};

Inputs random_inputs(const model::ModelConfig& mc, std::size_t p) {
  Rng rng(derive_seed(7, hash_label("bench"), p));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> host(0, static_cast<int>(mc.hosts) - 1);
  Inputs in{ad::Tensor({mc.hosts + p, mc.features * mc.window}), ad::Tensor({p, mc.hosts}), {}};
  for (auto& v : in.window.data()) v = u(rng);
  for (std::size_t t = 0; t < p; ++t) {
    in.schedule.data()[t * mc.hosts + host(rng)] = 1.0;
    in.placement.push_back(t % 2 ? host(rng) : -1);
  }
  return in;
}

// Cluster state from the middle of a random-policy episode at `lambda`.
sim::IntervalRecord recorded_state(double lambda) {
  sim::EpisodeConfig ep;
  ep.lambda = lambda;
  ep.intervals = 50;
  sched::RandomPolicy policy(3);
  return sim::run_episode(ep, policy).records.back();
}

const train::TrainResult& small_bundle() {
  static const train::TrainResult bundle = [] {
    sim::EpisodeConfig ep;
    ep.lambda = 3.0;
    ep.intervals = 60;
    sched::RandomPolicy policy(5);
    const auto data = telemetry::dataset_from_episode(sim::run_episode(ep, policy), 5);
    train::TrainConfig tc;
    tc.max_epochs = 1;
    return train::train_offline(data, tc);
  }();
  return bundle;
}

}  // namespace

static void BM_SurrogateForward(benchmark::State& state) {
  model::ModelConfig mc;
  model::Surrogate net(mc);
  const auto in = random_inputs(mc, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    ad::Tape tape;
    auto out = net.forward(
        tape, {tape.constant(in.window), tape.constant(in.schedule), in.placement}, false, false);
    benchmark::DoNotOptimize(out.prototype.value().data().data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SurrogateForward)->RangeMultiplier(4)->Range(1, 256)->Complexity();

static void BM_SurrogateBackward(benchmark::State& state) {
  model::ModelConfig mc;
  model::Surrogate net(mc);
  const auto in = random_inputs(mc, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    ad::Tape tape;
    auto out = net.forward(
        tape, {tape.leaf(in.window, false), tape.leaf(in.schedule, true), in.placement}, true, true);
    tape.backward(ad::add(ad::sum(out.reconstruction), ad::sum(out.prototype)));
    benchmark::DoNotOptimize(tape.size());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SurrogateBackward)->RangeMultiplier(4)->Range(1, 256)->Complexity();

static void BM_StepInterval(benchmark::State& state) {
  const auto rec = recorded_state(static_cast<double>(state.range(0)));
  const sim::SimConfig config;
  const sim::NoiseSource noise{11};
  for (auto _ : state) {
    auto step = sim::step_interval(rec.state, rec.schedule, config, noise);
    benchmark::DoNotOptimize(step.outcome.energy);
  }
  state.counters["tasks"] = static_cast<double>(rec.state.tasks.size());
}
BENCHMARK(BM_StepInterval)->Arg(1)->Arg(5)->Arg(10)->Arg(15);

static void BM_GobiDecision(benchmark::State& state) {
  const auto rec = recorded_state(static_cast<double>(state.range(0)));
  sim::EpisodeConfig ep;
  ep.lambda = static_cast<double>(state.range(0));
  sched::GobiPolicy gobi(0.5, 0.5);
  for (auto _ : state) {
    auto s = gobi.decide({rec.state, ep, rec.arrivals});
    benchmark::DoNotOptimize(s.data().data());
  }
  state.counters["tasks"] = static_cast<double>(rec.state.tasks.size());
}
BENCHMARK(BM_GobiDecision)->Arg(1)->Arg(5)->Arg(15)->Unit(benchmark::kMillisecond);

// One DeepFT decision: 20 descent iterations, each a co-simulated step and a
// surrogate forward/backward pass.
static void BM_OptimizeSchedule(benchmark::State& state) {
  const auto rec = recorded_state(static_cast<double>(state.range(0)));
  sim::EpisodeConfig ep;
  ep.lambda = static_cast<double>(state.range(0));
  sched::DeepFtConfig dc;
  dc.fine_tune = false;
  sched::DeepFtPolicy policy(small_bundle(), dc);
  for (auto _ : state) {
    auto s = policy.decide({rec.state, ep, rec.arrivals});
    benchmark::DoNotOptimize(s.data().data());
  }
  state.counters["tasks"] = static_cast<double>(rec.state.tasks.size());
}
BENCHMARK(BM_OptimizeSchedule)->Arg(1)->Arg(5)->Arg(15)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
