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

#include "ftsched/detect/detect.hpp"
#include "ftsched/error.hpp"

using namespace ftsched;
using namespace ftsched::detect;

TEST_CASE("fault_score: exact reconstruction scores zero") {
  ad::Tensor w({4, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.0, 0.5});
  const std::vector<int> task_host{1, 0};
  const auto s = fault_score(w, w, 2, task_host);
  CHECK(s.total == 0.0);
  CHECK(s.per_host == std::vector<double>{0.0, 0.0});
}

TEST_CASE("fault_score: over-prediction is clamped") {
  ad::Tensor w({2, 2}, {0.1, 0.2, 0.3, 0.4});
  ad::Tensor hat({2, 2}, {0.5, 0.2, 0.9, 0.41});
  CHECK(fault_score(w, hat, 2, {}).total == 0.0);
}

TEST_CASE("fault_score: single entry arithmetic") {
  ad::Tensor w({1, 1}, {0.9});
  ad::Tensor hat({1, 1}, {0.6});
  CHECK(fault_score(w, hat, 1, {}).total == doctest::Approx(0.09));
}

TEST_CASE("fault_score: task rows go to their host and partials sum to the total") {
  // Two hosts, two tasks; task 0 on host 1, task 1 on host 0.
  ad::Tensor w({4, 1}, {1.0, 1.0, 1.0, 1.0});
  ad::Tensor hat({4, 1}, {0.9, 0.8, 0.5, 0.0});
  const std::vector<int> task_host{1, 0};
  const auto s = fault_score(w, hat, 2, task_host);
  CHECK(s.per_host[0] == doctest::Approx(0.01 + 1.0));
  CHECK(s.per_host[1] == doctest::Approx(0.04 + 0.25));
  CHECK(s.total == doctest::Approx(s.per_host[0] + s.per_host[1]));
}

TEST_CASE("fault_score: shape mismatch") {
  CHECK_THROWS_AS(fault_score(ad::Tensor({2, 2}), ad::Tensor({2, 3}), 2, {}), DimensionError);
}

TEST_CASE("fault_label is strict") {
  CHECK_FALSE(fault_label(1.5, 1.5));
  CHECK(fault_label(1.5 + 1e-12, 1.5));
  CHECK_FALSE(fault_label(0.0, 1e-6));
}

TEST_CASE("POT: constant stream never alarms") {
  PotConfig pc;
  Pot pot(pc);
  const std::vector<double> xs(pc.n_init, 2.0);
  pot.initialize(xs);
  CHECK(pot.threshold() > 2.0);
  for (int i = 0; i < 500; ++i) CHECK_FALSE(pot.update(2.0).label);
}

TEST_CASE("POT: exponential(1) tail quantile") {
  std::mt19937_64 g(17);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> xs(100000);
  for (auto& x : xs) x = e(g);
  PotConfig pc;
  pc.q = 1e-3;
  pc.n_init = xs.size();
  Pot pot(pc);
  pot.initialize(xs);
  const double oracle = -std::log(1e-3);
  CHECK(std::abs(pot.threshold() - oracle) <= 0.15 * oracle);
}

TEST_CASE("POT: uniform(0,1) threshold between the empirical 99th percentile and 1.1") {
  std::mt19937_64 g(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(20000);
  for (auto& x : xs) x = u(g);
  PotConfig pc;
  pc.q = 1e-2;
  pc.n_init = xs.size();
  Pot pot(pc);
  pot.initialize(xs);
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  const double p99 = sorted[static_cast<std::size_t>(0.99 * (sorted.size() - 1))];
  CHECK(pot.threshold() <= 1.1);
  CHECK(pot.threshold() >= p99 - 1e-3);
}

TEST_CASE("POT: use before initialization is a state error") {
  Pot pot;
  CHECK_THROWS_AS(pot.threshold(), StateError);
  CHECK_THROWS_AS(pot.update(1.0), StateError);
  CHECK_THROWS_AS(pot.initialize(std::vector<double>(3, 1.0)), ParameterError);
}

TEST_CASE("POT: alarms do not join the peak set") {
  PotConfig pc;
  pc.n_init = 200;
  std::mt19937_64 g(5);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> xs(200);
  for (auto& x : xs) x = e(g);
  Pot pot(pc);
  pot.initialize(xs);
  const auto peaks = pot.peaks();
  const auto step = pot.update(1e6);
  CHECK(step.label);
  CHECK(pot.peaks() == peaks);
}

TEST_CASE("stream_pot: short streams are left unlabeled") {
  PotConfig pc;
  const std::vector<double> xs(10, 5.0);
  const auto run = stream_pot(xs, pc);
  CHECK(run.labels == std::vector<std::uint8_t>(10, 0));
  CHECK(std::isinf(run.thresholds[0]));
}

TEST_CASE("stream_pot agrees with a warm POT updated by hand") {
  PotConfig pc;
  std::mt19937_64 g(8);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> xs(400);
  for (auto& x : xs) x = e(g);
  xs[300] = 40.0;
  const auto run = stream_pot(xs, pc);
  Pot pot(pc);
  pot.initialize(std::span(xs).first(pc.n_init));
  for (std::size_t i = pc.n_init; i < xs.size(); ++i) {
    const auto s = pot.update(xs[i]);
    CHECK(run.labels[i] == (s.label ? 1 : 0));
    CHECK(run.thresholds[i] == s.threshold);
  }
  CHECK(run.labels[300] == 1);
}

TEST_CASE("proto_distance examples") {
  ClassStats unit{{0.3, 0.7}, {1.0, 1.0}};
  CHECK(proto_distance(std::vector<double>{0.3, 0.7}, unit) == doctest::Approx(0.0));
  ClassStats scalar{{0.0}, {1.0}};
  CHECK(proto_distance(std::vector<double>{1.0}, scalar) == doctest::Approx(0.5));
  ClassStats wide{{0.4}, {std::exp(1.0)}};
  CHECK(proto_distance(std::vector<double>{0.4}, wide) == doctest::Approx(1.0));
  CHECK_THROWS_AS(proto_distance(std::vector<double>{1.0, 2.0}, scalar), DimensionError);
}

TEST_CASE("proto_distance with unit sigma is half the squared distance") {
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    ClassStats c{{u(g), u(g), u(g)}, {1.0, 1.0, 1.0}};
    std::vector<double> p{u(g), u(g), u(g)};
    double sq = 0.0;
    for (int d = 0; d < 3; ++d) sq += (p[d] - c.mu[d]) * (p[d] - c.mu[d]);
    CHECK(proto_distance(p, c) == doctest::Approx(0.5 * sq));
  }
}

TEST_CASE("proto_distance: differentiable form matches the scalar one") {
  ClassStats c{{0.2, 0.9}, {0.5, 0.1}};
  ad::Tape tape;
  auto p = tape.leaf(ad::Tensor({1, 2}, {0.6, 0.4}), true);
  auto d = proto_distance(p, c);
  CHECK(d.value().item() == doctest::Approx(proto_distance(std::vector<double>{0.6, 0.4}, c)));
  tape.backward(d);
  // dD/dP = (P - mu) / sigma^2
  const auto grad = tape.grad(p);
  CHECK(grad.data()[0] == doctest::Approx((0.6 - 0.2) / 0.25));
  CHECK(grad.data()[1] == doctest::Approx((0.4 - 0.9) / 0.01));
}

TEST_CASE("classify examples") {
  PrototypeStats stats;
  for (double m : {0.0, 0.2, 0.5, 0.9}) stats.classes.push_back({{m, m}, {1.0, 1.0}});
  const std::vector<double> at2{0.5, 0.5};
  CHECK(classify(at2, stats, false) == 0);
  CHECK(classify(at2, stats, true) == 2);

  PrototypeStats single;
  single.classes = {{{0.0}, {1.0}}, {{5.0}, {1.0}}};
  CHECK(classify(std::vector<double>{-3.0}, single, true) == 1);

  // Equidistant fault classes resolve to the lower index.
  PrototypeStats tie;
  tie.classes = {{{0.0}, {1.0}}, {{-1.0}, {1.0}}, {{1.0}, {1.0}}};
  CHECK(classify(std::vector<double>{0.0}, tie, true) == 1);
}

TEST_CASE("diagnose_hosts") {
  const std::vector<double> zeros(5, 0.0), thr(5, 0.1);
  const auto d0 = diagnose_hosts(zeros, thr);
  CHECK(d0.ranking == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(d0.labels == std::vector<std::uint8_t>(5, 0));

  std::vector<double> one(5, 0.05);
  one[3] = 0.5;
  const auto d1 = diagnose_hosts(one, thr);
  CHECK(d1.ranking.front() == 3);
  CHECK(d1.labels == std::vector<std::uint8_t>{0, 0, 0, 1, 0});
  CHECK_THROWS_AS(diagnose_hosts(one, std::vector<double>(4, 0.1)), DimensionError);
}

TEST_CASE("empirical_quantile interpolates") {
  CHECK(empirical_quantile({3.0, 1.0, 2.0, 4.0}, 0.5) == doctest::Approx(2.5));
  CHECK(empirical_quantile({7.0}, 0.9) == 7.0);
  CHECK_THROWS_AS(empirical_quantile({}, 0.5), ParameterError);
}
