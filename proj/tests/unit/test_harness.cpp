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
#include <cstdlib>
#include <fstream>
#include <random>

#include "config.hpp"
#include "ftsched/error.hpp"
#include "ftsched/harness/experiment.hpp"
#include "ftsched/harness/metrics.hpp"
#include "test_util.hpp"

using namespace ftsched;

namespace {

using Flags = std::vector<std::uint8_t>;

// Average ranks (1-based) computed by counting, for the Spearman oracle.
std::vector<double> count_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double below = 0.0, equal = 0.0;
    for (double w : v) {
      below += w < v[i];
      equal += w == v[i];
    }
    r[i] = below + (equal + 1.0) / 2.0;
  }
  return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = test::mean(x), my = test::mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

harness::ExperimentConfig tiny(const std::string& policy) {
  harness::ExperimentConfig c;
  c.policy = policy;
  c.intervals = 12;
  c.lambda = 3.0;
  c.seeds = {1, 2};
  c.calibrate_slo = false;
  return c;
}

}  // namespace

TEST_CASE("detection metrics example") {
  const Flags pred{1, 1, 0, 0, 1}, truth{1, 0, 0, 1, 1};
  const auto r = metrics::detection_metrics(pred, truth);
  CHECK(r.tp == 2);
  CHECK(r.fp == 1);
  CHECK(r.tn == 1);
  CHECK(r.fn == 1);
  CHECK(r.accuracy == doctest::Approx(0.6));
  CHECK(r.precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.recall == doctest::Approx(2.0 / 3.0));
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(r.undefined_precision);
}

TEST_CASE("detection metrics with empty denominators") {
  const auto none = metrics::detection_metrics(Flags{0, 0, 0}, Flags{0, 1, 0});
  CHECK(none.undefined_precision);
  CHECK(none.precision == 0.0);
  CHECK(none.f1 == 0.0);
  const auto clean = metrics::detection_metrics(Flags{0, 0}, Flags{0, 0});
  CHECK(clean.undefined_recall);
  CHECK(clean.accuracy == 1.0);
  CHECK_THROWS_AS(metrics::detection_metrics(Flags{0}, Flags{0, 1}), DimensionError);
}

TEST_CASE("diagnosis metrics examples") {
  const auto perfect = metrics::diagnosis_metrics({{2, 0, 1}}, {{2}});
  CHECK(perfect.hit_rate == 1.0);
  CHECK(perfect.ndcg == doctest::Approx(1.0));

  // Truth {0, 1}; the top two of the ranking are {2, 0}.
  const auto half = metrics::diagnosis_metrics({{2, 0, 1}}, {{0, 1}});
  CHECK(half.hit_rate == doctest::Approx(0.5));
  const double dcg = 1.0 / std::log2(3.0), ideal = 1.0 + 1.0 / std::log2(3.0);
  CHECK(half.ndcg == doctest::Approx(dcg / ideal));

  const auto skipped = metrics::diagnosis_metrics({{0, 1}, {1, 0}}, {{}, {1}});
  CHECK(skipped.intervals == 1);
  CHECK(skipped.hit_rate == 1.0);
}

TEST_CASE("improvement ratio examples") {
  const std::vector<double> a{1.0, 2.0, 3.0}, b{1.0, 1.0, 4.0};
  CHECK(metrics::improvement_ratio(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(metrics::improvement_ratio(a, a) == 0.0);
  CHECK(metrics::improvement_ratio({}, {}) == 0.0);
  CHECK_THROWS_AS(metrics::improvement_ratio(a, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("spearman matches Pearson over counted ranks") {
  CHECK(metrics::spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{10, 20, 30, 99}) ==
        doctest::Approx(1.0));
  CHECK(metrics::spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) ==
        doctest::Approx(-1.0));
  std::mt19937_64 g(3);
  std::uniform_int_distribution<int> u(0, 5);  // many ties
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(8), y(8);
    for (auto& v : x) v = u(g);
    for (auto& v : y) v = u(g);
    const auto rx = count_ranks(x), ry = count_ranks(y);
    if (test::population_std(rx) == 0.0 || test::population_std(ry) == 0.0) continue;
    CHECK(metrics::spearman(x, y) == doctest::Approx(pearson(rx, ry)));
  }
}

TEST_CASE("descent fraction examples") {
  std::vector<sched::DeepFtInterval> ivs(4);
  auto losses = [](std::initializer_list<double> ls) {
    std::vector<sched::IterationLog> t;
    for (double l : ls) {
      sched::IterationLog log;
      log.loss = l;
      t.push_back(log);
    }
    return t;
  };
  ivs[0].trajectory = losses({3.0, 2.0, 1.0});
  ivs[1].trajectory = losses({1.0, 2.0});
  ivs[2].trajectory = losses({1.0, 5.0, 1.0});
  CHECK(harness::descent_fraction(ivs) == doctest::Approx(0.5));
  CHECK(harness::descent_fraction({}) == 0.0);
}

TEST_CASE("metric lookup") {
  const harness::MetricRow row{{"a", 1.0}, {"b", 2.0}};
  CHECK(harness::metric(row, "b") == 2.0);
  CHECK_THROWS_AS(harness::metric(row, "c"), ParameterError);
}

TEST_CASE("run_experiment is deterministic and thread-independent") {
  auto c = tiny("random");
  const auto a = harness::run_experiment(c);
  c.parallel = false;
  const auto b = harness::run_experiment(c);
  REQUIRE(a.seeds.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) CHECK(a.seeds[i].metrics == b.seeds[i].metrics);
  CHECK(a.mean == b.mean);
  CHECK(a.seeds[0].metrics != a.seeds[1].metrics);

  const test::TempDir dir;
  harness::write_metrics_csv(dir.path / "a.csv", std::span(&a, 1));
  harness::write_metrics_csv(dir.path / "b.csv", std::span(&b, 1));
  CHECK(test::slurp(dir.path / "a.csv") == test::slurp(dir.path / "b.csv"));
}

TEST_CASE("run_experiment: every baseline produces the same metric names") {
  std::vector<std::string> names;
  for (const char* p : {"random", "reactive_threshold", "gobi_ref"}) {
    auto c = tiny(p);
    c.seeds = {4};
    const auto r = harness::run_experiment(c);
    std::vector<std::string> these;
    for (const auto& [k, v] : r.mean) {
      these.push_back(k);
      CHECK(std::isfinite(v));
    }
    if (names.empty()) names = these;
    CHECK(these == names);
    CHECK(harness::metric(r.mean, "qos_mean") <= 1.0);
  }
  auto bad = tiny("nope");
  CHECK_THROWS_AS(harness::run_experiment(bad), ParameterError);
}

TEST_CASE("sweep over a single rate") {
  auto c = tiny("reactive_threshold");
  c.seeds = {3};
  const std::vector<double> one{2.5};
  const auto out = harness::sweep_lambda(c, one);
  REQUIRE(out.size() == 1);
  CHECK(out[0].lambda == 2.5);
  CHECK(out[0].policy == "reactive_threshold");
  c.lambda = 2.5;
  CHECK(harness::run_experiment(c).mean == out[0].mean);
}

TEST_CASE("completions round trip") {
  std::vector<sim::CompletedTask> done(3);
  for (int i = 0; i < 3; ++i) {
    done[i].id = i;
    done[i].profile = static_cast<sim::AppProfile>(i);
    done[i].arrival_interval = i;
    done[i].completion_interval = i + 4;
    done[i].response_time = 1234.5 + i / 3.0;
    done[i].slo_violated = i == 1;
  }
  const test::TempDir dir;
  harness::write_completions(dir.path / "c.csv", done);
  const auto back = harness::read_completions(dir.path / "c.csv");
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].id == done[i].id);
    CHECK(back[i].profile == done[i].profile);
    CHECK(back[i].completion_interval == done[i].completion_interval);
    CHECK(back[i].response_time == done[i].response_time);
    CHECK(back[i].slo_violated == done[i].slo_violated);
  }
}

TEST_CASE("config: environment names") {
  CHECK(cli::env_name("lambda") == "FTSCHED_LAMBDA");
  CHECK(cli::env_name("sim.burst_probability") == "FTSCHED_SIM_BURST_PROBABILITY");
}

TEST_CASE("config: file, then environment, then explicit keys") {
  const test::TempDir dir;
  const auto file = dir.path / "run.conf";
  {
    std::ofstream out(file);
    out << "lambda=7\nintervals=40\nsim.demand_noise=0.2\nseeds=3,4\n";
  }
  cli::Config c;
  cli::apply_file(c, file);
  CHECK(c.experiment.lambda == 7.0);
  CHECK(c.experiment.seeds == std::vector<std::uint64_t>{3, 4});

  ::setenv("FTSCHED_INTERVALS", "55", 1);
  ::setenv("FTSCHED_SIM_DEMAND_NOISE", "0.3", 1);
  cli::apply_env(c);
  ::unsetenv("FTSCHED_INTERVALS");
  ::unsetenv("FTSCHED_SIM_DEMAND_NOISE");
  CHECK(c.experiment.lambda == 7.0);
  CHECK(c.experiment.intervals == 55);
  CHECK(c.experiment.sim.demand_noise == 0.3);

  cli::apply(c, "sim.demand_noise", "0.4");
  CHECK(c.experiment.sim.demand_noise == 0.4);

  CHECK_THROWS_AS(cli::apply(c, "no.such.key", "1"), ParameterError);
  CHECK_THROWS_AS(cli::apply(c, "intervals", "many"), ParameterError);
  CHECK_THROWS_AS(cli::apply(c, "fine_tune", "maybe"), ParameterError);
}

TEST_CASE("config: written files read back to the same settings") {
  cli::Config c;
  cli::apply(c, "hosts", "6");
  cli::apply(c, "lambdas", "1,2.5");
  cli::apply(c, "model.seed", "77");
  cli::apply(c, "policy", "gobi_ref");
  cli::sync(c);
  CHECK(c.train.model.hosts == 6);
  CHECK(c.experiment.sim.hosts == 6);

  const test::TempDir dir;
  cli::write_config(dir.path / "config", c);
  cli::Config back;
  cli::apply_file(back, dir.path / "config");
  for (const auto& f : cli::fields()) CHECK(f.get(back) == f.get(c));
}
