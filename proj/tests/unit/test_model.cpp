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
#include <random>

#include "fixtures.hpp"
#include "ftsched/error.hpp"
#include "ftsched/surrogate/model.hpp"
#include "ftsched/train/train.hpp"
#include "test_util.hpp"

using namespace ftsched;
using model::ModelConfig;
using model::Surrogate;

namespace {

// Parameter count written out layer by layer for n features, window k,
// width d, r graph rounds, prototype size d_p and m hosts.
std::size_t expected_parameters(std::size_t m, std::size_t n, std::size_t k, std::size_t d,
                                std::size_t r, std::size_t dp) {
  const std::size_t attention = 4 * (d * d + d);
  const std::size_t norm = 2 * d;
  std::size_t total = 0;
  total += n * d + d + k * d;           // embedding and positions
  total += attention + norm;            // time attention
  total += n * d + d + r * d * d;       // graph input and convolutions
  total += 6 * d * d + 4 * d;           // gru
  total += m * d + d + norm;            // decision encoder
  total += 2 * d * d + d + 2 * d + 1;   // fusion and scoring
  total += attention + norm;            // decision self-attention
  total += 2 * d * n * k + n * k;       // reconstruction head
  total += d * dp + dp;                 // prototype head
  return total;
}

struct Pass {
  ad::Tensor reconstruction, prototype;
};

Pass run(Surrogate& net, const ad::Tensor& window, const ad::Tensor& schedule,
         const std::vector<int>& placement, bool train = false) {
  ad::Tape tape;
  const model::Inputs in{tape.constant(window), tape.constant(schedule), placement};
  const auto o = net.forward(tape, in, train, false);
  return {o.reconstruction.value(), o.prototype.value()};
}

ad::Tensor uniform(std::mt19937_64& g, std::size_t r, std::size_t c) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ad::Tensor t({r, c});
  for (auto& v : t.data()) v = u(g);
  return t;
}

ad::Tensor one_hot(std::size_t p, std::size_t m, std::mt19937_64& g) {
  std::uniform_int_distribution<std::size_t> h(0, m - 1);
  ad::Tensor t({p, m});
  for (std::size_t i = 0; i < p; ++i) t.at(i, h(g)) = 1.0;
  return t;
}

}  // namespace

TEST_CASE("migration graph examples") {
  // Three hosts. Task 0 moves 0 -> 2, task 1 stays on 1, task 2 is new,
  // task 3 repeats the 0 -> 2 move.
  const std::vector<double> s{0.1, 0.2, 0.7, 0.0, 1.0, 0.0, 0.9, 0.05, 0.05, 0.2, 0.3, 0.5};
  const std::vector<int> placement{0, 1, -1, 0};
  const auto g = model::build_migration_graph(s, 3, placement);
  CHECK(g.edges == std::vector<std::pair<int, int>>{{0, 2}});
  const auto a = g.in_adjacency();
  CHECK(a.shape() == ad::Shape{3, 3});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(a.at(i, j) == (i == 2 && j == 0 ? 1.0 : 0.0));

  CHECK(model::build_migration_graph({}, 4, {}).edges.empty());
  const std::vector<double> swap{0.0, 1.0, 1.0, 0.0};
  const std::vector<int> both{0, 1};
  CHECK(model::build_migration_graph(swap, 2, both).edges ==
        std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
}

TEST_CASE("parameter count at the default shape") {
  const Surrogate net{ModelConfig{}};
  CHECK(net.parameter_count() == expected_parameters(8, 3, 5, 32, 2, 8));
  CHECK(net.parameter_count() == 21048);
}

TEST_CASE("parameter count is affine in m and matches the layer formula") {
  for (std::size_t m : {1, 2, 4, 8, 16, 50}) {
    ModelConfig c;
    c.hosts = m;
    CHECK(Surrogate(c).parameter_count() == expected_parameters(m, 3, 5, 32, 2, 8));
  }
  ModelConfig a, b;
  a.hosts = 8;
  b.hosts = 9;
  CHECK(Surrogate(b).parameter_count() - Surrogate(a).parameter_count() == a.hidden);
}

TEST_CASE("the same parameters serve any number of tasks") {
  Surrogate net{ModelConfig{}};
  const auto before = net.checksum();
  std::mt19937_64 g(3);
  for (std::size_t p : {1, 10, 100}) {
    const std::vector<int> placement(p, -1);
    const auto out = run(net, uniform(g, 8 + p, 15), one_hot(p, 8, g), placement);
    CHECK(out.reconstruction.shape() == ad::Shape{8 + p, 15});
    CHECK(out.prototype.shape() == ad::Shape{1, 8});
  }
  CHECK(net.checksum() == before);
  CHECK(net.parameter_count() == 21048);
}

TEST_CASE("construction and forward are deterministic") {
  ModelConfig c;
  c.seed = 9;
  Surrogate a(c), b(c);
  CHECK(a.checksum() == b.checksum());
  c.seed = 10;
  CHECK(Surrogate(c).checksum() != a.checksum());

  std::mt19937_64 g(1);
  const auto w = uniform(g, 12, 15);
  const auto s = one_hot(4, 8, g);
  const std::vector<int> placement{0, 3, -1, 7};
  const auto x = run(a, w, s, placement), y = run(b, w, s, placement);
  CHECK(x.reconstruction == y.reconstruction);
  CHECK(x.prototype == y.prototype);
}

TEST_CASE("zeroed output heads decode to one half") {
  Surrogate net{ModelConfig{}};
  for (const char* name : {"out.w", "out.b", "proto.w", "proto.b"}) net.params().at(name).fill(0.0);
  std::mt19937_64 g(2);
  const auto out = run(net, uniform(g, 11, 15), one_hot(3, 8, g), {1, -1, 4});
  for (double v : out.reconstruction.data()) CHECK(v == 0.5);
  for (double v : out.prototype.data()) CHECK(v == 0.5);
}

TEST_CASE("outputs lie strictly inside (0, 1)") {
  Surrogate net{ModelConfig{}};
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = 1 + trial % 6;
    std::vector<int> placement(p);
    for (auto& h : placement) h = static_cast<int>(g() % 9) - 1;
    const auto out = run(net, uniform(g, 8 + p, 15), one_hot(p, 8, g), placement);
    for (double v : out.reconstruction.data()) CHECK((v > 0.0 && v < 1.0));
    for (double v : out.prototype.data()) CHECK((v > 0.0 && v < 1.0));
  }
}

TEST_CASE("surrogate rejects mismatched inputs") {
  Surrogate net{ModelConfig{}};
  std::mt19937_64 g(1);
  CHECK_THROWS_AS(run(net, uniform(g, 10, 14), one_hot(2, 8, g), {0, 1}), DimensionError);
  CHECK_THROWS_AS(run(net, uniform(g, 10, 15), one_hot(2, 7, g), {0, 1}), DimensionError);
  CHECK_THROWS_AS(run(net, uniform(g, 10, 15), one_hot(2, 8, g), {0}), DimensionError);
  ModelConfig bad;
  bad.hidden = 30;
  bad.heads = 4;
  CHECK_THROWS_AS(Surrogate{bad}, ParameterError);
}

TEST_CASE("eval-mode passes do not touch the model; train mode moves batch-norm statistics") {
  Surrogate net{ModelConfig{}};
  std::mt19937_64 g(4);
  const auto w = uniform(g, 13, 15);
  const auto s = one_hot(5, 8, g);
  const std::vector<int> placement{0, 1, 2, 3, -1};
  const auto state0 = net.state();
  run(net, w, s, placement, false);
  CHECK(net.state() == state0);
  run(net, w, s, placement, true);
  CHECK(net.state() != state0);
  CHECK(net.params() == Surrogate{ModelConfig{}}.params());
}

TEST_CASE("surrogate save and load round trip") {
  ModelConfig c;
  c.seed = 21;
  Surrogate net(c);
  std::mt19937_64 g(4);
  run(net, uniform(g, 10, 15), one_hot(2, 8, g), {0, 1}, true);
  const test::TempDir dir;
  net.save(dir.path / "model");
  const auto back = Surrogate::load(dir.path / "model");
  CHECK(back.config() == net.config());
  CHECK(back.state() == net.state());
  CHECK(back.checksum() == net.checksum());
}

TEST_CASE("reconstruction loss is zero on equal inputs and symmetric") {
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = uniform(g, 4, 6), b = uniform(g, 4, 6);
    ad::Tape tape;
    const auto va = tape.constant(a), vb = tape.constant(b);
    CHECK(train::reconstruction_loss(va, va).value().item() == 0.0);
    double oracle = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) oracle += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    const double ab = train::reconstruction_loss(va, vb).value().item();
    CHECK(ab == doctest::Approx(oracle));
    CHECK(ab == train::reconstruction_loss(vb, va).value().item());
  }
}

TEST_CASE("masked reconstruction loss ignores departed rows") {
  ad::Tensor a({3, 2}, {0.0, 0.0, 1.0, 1.0, 0.0, 0.5});
  ad::Tensor b({3, 2}, {0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  const std::vector<std::uint8_t> keep{1, 0, 1};
  const auto mask = train::row_mask(keep, 2);
  CHECK(mask == ad::Tensor({3, 2}, {1, 1, 0, 0, 1, 1}));
  ad::Tape tape;
  CHECK(train::reconstruction_loss(tape.constant(a), tape.constant(b), tape.constant(mask))
            .value()
            .item() == doctest::Approx(0.25));
}

TEST_CASE("initial class statistics") {
  const auto s = train::initial_stats(3, 8);
  REQUIRE(s.classes.size() == 4);
  for (const auto& c : s.classes) {
    CHECK(c.mu == std::vector<double>(8, 0.5));
    CHECK(c.sigma == std::vector<double>(8, 1.0));
  }
}

TEST_CASE("class_stats matches mean and population std with the sigma floor") {
  std::mt19937_64 g(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto previous = train::initial_stats(3, 2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> protos;
    std::vector<std::size_t> classes;
    for (int i = 0; i < 30; ++i) {
      protos.push_back({u(g), 0.4});  // second dimension is constant
      classes.push_back(g() % 3);     // class 3 never appears
    }
    const auto s = train::class_stats(protos, classes, previous);
    REQUIRE(s.classes.size() == 4);
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> xs;
      for (std::size_t i = 0; i < protos.size(); ++i)
        if (classes[i] == c) xs.push_back(protos[i][0]);
      if (xs.empty()) continue;
      CHECK(s.classes[c].mu[0] == doctest::Approx(test::mean(xs)));
      CHECK(s.classes[c].sigma[0] ==
            doctest::Approx(std::max(detect::kSigmaFloor, test::population_std(xs))));
      CHECK(s.classes[c].mu[1] == doctest::Approx(0.4));
      CHECK(s.classes[c].sigma[1] == detect::kSigmaFloor);
    }
    CHECK(s.classes[3] == previous.classes[3]);
  }
}

TEST_CASE("triplet loss: scalar and differentiable forms agree with the distance oracle") {
  detect::PrototypeStats stats;
  stats.classes = {{{0.1, 0.1}, {1.0, 0.5}}, {{0.8, 0.2}, {0.3, 0.3}}, {{0.5, 0.9}, {1.0, 1.0}}};
  const std::vector<double> p{0.3, 0.6};
  for (std::size_t phi = 0; phi < 3; ++phi) {
    double oracle = detect::proto_distance(p, stats.classes[phi]);
    for (std::size_t i = 0; i < 3; ++i)
      if (i != phi) oracle -= detect::proto_distance(p, stats.classes[i]);
    CHECK(train::triplet_loss(p, phi, stats) == doctest::Approx(oracle));
    ad::Tape tape;
    CHECK(train::triplet_loss(tape.constant(ad::Tensor({1, 2}, p)), phi, stats).value().item() ==
          doctest::Approx(oracle));
  }
  CHECK_THROWS_AS(train::triplet_loss(p, 3, stats), ParameterError);
}

TEST_CASE("make_sample flattens and normalizes a record") {
  const auto& data = test::small_dataset();
  const auto& bundle = test::small_bundle();
  const auto& r = data[30];
  const auto s = train::make_sample(r, bundle.scaler);
  const std::size_t e = 8 + r.tasks();
  CHECK(s.window.shape() == ad::Shape{e, 15});
  CHECK(s.next.shape() == ad::Shape{e, 15});
  CHECK(s.mask.shape() == ad::Shape{e, 15});
  CHECK(s.schedule.shape() == ad::Shape{r.tasks(), 8});
  CHECK(s.task_host == r.schedule.assignment());
  CHECK(s.faulty == r.faulty());
  for (double v : s.window.data()) CHECK((v >= 0.0 && v <= 1.0));
  CHECK(s.window.at(0, 0) == bundle.scaler.scale(0, r.window.data()[0]));
}

TEST_CASE("offline training: curve, step budget and checkpoint round trip") {
  const auto& bundle = test::small_bundle();
  CHECK(bundle.steps <= 40);
  CHECK(bundle.steps > 0);
  CHECK(!bundle.curve.empty());
  CHECK(bundle.curve.size() <= 2);
  CHECK(bundle.best_epoch >= 1);
  CHECK(bundle.best_epoch <= bundle.curve.size());
  for (std::size_t i = 0; i < bundle.curve.size(); ++i) CHECK(bundle.curve[i].epoch == i + 1);
  CHECK(bundle.stats.classes.size() == 4);
  CHECK(bundle.calibration.scores.size() > 0);
  CHECK(std::isfinite(bundle.threshold));
  for (const auto& e : bundle.curve) {
    CHECK(std::isfinite(e.train_reconstruction));
    CHECK(std::isfinite(e.val_reconstruction));
  }

  const test::TempDir dir;
  train::save_result(dir.path, bundle);
  const auto back = train::load_result(dir.path);
  CHECK(back.model.checksum() == bundle.model.checksum());
  CHECK(back.stats == bundle.stats);
  CHECK(back.scaler == bundle.scaler);
  CHECK(back.calibration.scores == bundle.calibration.scores);
  CHECK(back.threshold == bundle.threshold);

  train::write_loss_curve(dir.path / "loss.csv", bundle.curve);
  const auto text = test::slurp(dir.path / "loss.csv");
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) ==
        bundle.curve.size() + 1);
}

TEST_CASE("training rejects empty and mismatched datasets") {
  train::TrainConfig c;
  CHECK_THROWS_AS(train::train_offline(telemetry::Dataset(8, 3, 5), c), ParameterError);
  c.model.window = 4;
  CHECK_THROWS_AS(train::train_offline(test::small_dataset(), c), DimensionError);
}
