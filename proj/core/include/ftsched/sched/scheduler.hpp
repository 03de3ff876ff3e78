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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ftsched/autodiff/optim.hpp"
#include "ftsched/autodiff/tape.hpp"
#include "ftsched/detect/detect.hpp"
#include "ftsched/sim/schedule.hpp"
#include "ftsched/sim/simulator.hpp"
#include "ftsched/surrogate/model.hpp"

namespace ftsched::sched {

struct OptConfig {
  std::size_t iterations = 20;
  double learning_rate = 0.05;    // on the decision logits
  double min_learning_rate = 0.0;
  std::size_t period = 10;        // cosine cycle length in iterations
  double period_mult = 1.0;
  double temperature = 1.0;       // row softmax of logits / temperature
  double init_logit = 4.0;        // logit of the S_init entry of each row

  void validate() const;
};

// L_O = ||ReLU(W_next - W_hat)||^2 over rows kept by `mask`, plus the
// distance of the prototype to the no-anomaly class.
ad::Var optimization_loss(ad::Var next, ad::Var predicted, ad::Var prototype, ad::Var mask,
                          const detect::ClassStats& nap);

// What the co-simulator reports for a discrete decision: the normalized
// next window aligned to the current entities, and its survival mask.
struct CoSimResult {
  ad::Tensor next;
  std::vector<std::uint8_t> survives;
};
using CoSim = std::function<CoSimResult(const sim::ScheduleMatrix&)>;

// Turns a relaxed decision into an executable one.
using Projection = std::function<sim::ScheduleMatrix(const sim::ScheduleMatrix&)>;

struct IterationLog {
  std::size_t iteration = 0;
  double loss = 0.0;          // L_O
  double nap_distance = 0.0;  // D(P, c_0)
  double learning_rate = 0.0;
  std::size_t chosen_class = 0;  // nearest class of the prototype
  std::vector<double> prototype;
  std::vector<int> decision;  // projected assignment queried this iteration
};

struct OptResult {
  sim::ScheduleMatrix schedule;  // projected decision of the last iteration
  std::vector<IterationLog> trajectory;
};

// Gradient descent on row-softmax logits initialized from `init`. Each
// iteration projects the current relaxation, queries `cosim` with it,
// evaluates L_O through the eval-mode surrogate and takes one Adam step on
// the logits.
OptResult optimize_schedule(model::Surrogate& model, const ad::Tensor& window,
                            const sim::ScheduleMatrix& init, std::span<const int> placement,
                            const CoSim& cosim, const Projection& project,
                            const detect::PrototypeStats& stats, const OptConfig& config);

// Executable one-hot decision. Rows are handled by descending confidence;
// a migration that does not fit its target (nominal utilization on top of
// the tasks already there or already admitted exceeds `cap` on some
// resource) keeps the task in place, and a
// new task that does not fit goes to the least utilized host that fits it,
// or the least utilized host when none does. Sources keep carrying a
// migrating task's demand, as they do in the simulator.
sim::ScheduleMatrix project_to_feasible(const sim::ScheduleMatrix& relaxed,
                                        std::span<const int> placement,
                                        std::span<const sim::ResourceVec> demand,
                                        std::span<const sim::HostSpec> hosts,
                                        double cap = 0.8);
sim::ScheduleMatrix project_to_feasible(const sim::ScheduleMatrix& relaxed,
                                        const sim::ClusterState& state, double cap = 0.8);

// Self-labeled online update of the surrogate.
struct FineTuneConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.0;
  double stats_decay = 0.99;  // EMA of the class statistics
};

struct FineTuneStep {
  bool applied = false;
  double reconstruction = 0.0;
  double triplet = 0.0;
  double score = 0.0;
  bool label = false;
  std::size_t phi = 0;
};

class FineTuner {
 public:
  explicit FineTuner(FineTuneConfig config = {});

  // One gradient step on L_R + L_T for (window, schedule) -> next. The
  // label compares the fault score with `threshold`; the class comes from
  // classify() and its stats move toward the prototype. Batch norm stays in
  // eval mode. Non-finite losses skip the step.
  FineTuneStep step(model::Surrogate& model, detect::PrototypeStats& stats,
                    const ad::Tensor& window, const ad::Tensor& schedule,
                    std::span<const int> placement, const ad::Tensor& next,
                    std::span<const std::uint8_t> survives, double threshold);

  std::size_t skipped() const noexcept { return skipped_; }

 private:
  FineTuneConfig config_;
  ad::Adam optimizer_;
  std::size_t skipped_ = 0;
};

}  // namespace ftsched::sched
