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

#include "fixtures.hpp"

#include "ftsched/sched/policies.hpp"

namespace ftsched::test {

const telemetry::Dataset& small_dataset() {
  static const telemetry::Dataset data = [] {
    sim::EpisodeConfig ep;
    ep.intervals = 60;
    ep.lambda = 2.0;
    ep.seed = 3;
    sched::RandomPolicy p(3);
    return telemetry::dataset_from_episode(sim::run_episode(ep, p), 5);
  }();
  return data;
}

const train::TrainResult& small_bundle() {
  static const train::TrainResult bundle = [] {
    train::TrainConfig c;
    c.learning_rate = 1e-3;
    c.max_epochs = 2;
    c.max_steps = 40;
    c.pot.n_init = 50;
    return train::train_offline(small_dataset(), c);
  }();
  return bundle;
}

}  // namespace ftsched::test
