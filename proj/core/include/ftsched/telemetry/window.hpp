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
#include <span>
#include <string>
#include <vector>

#include "ftsched/autodiff/tensor.hpp"
#include "ftsched/sim/types.hpp"

namespace ftsched::telemetry {

inline constexpr std::size_t kFeatures = sim::kResources;  // cpu, ram, disk

// Observable state x_t: host rows (utilization) followed by task rows
// (realized demand over the mean host capacity), n features each.
struct StateMatrix {
  std::size_t hosts = 0;
  std::vector<int> task_ids;
  std::vector<double> values;  // (hosts + tasks) x kFeatures, row-major

  std::size_t rows() const noexcept { return hosts + task_ids.size(); }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * kFeatures, kFeatures};
  }
};

// Tasks that have not been placed yet are skipped when `placed_only` is set;
// this gives the post-step observation without next interval's arrivals.
StateMatrix observe(const sim::ClusterState& state, bool placed_only = false);

// Raw window {x_{t-k+1}, ..., x_t} with shape {E, n, k} (entity, feature,
// time), entities being the rows of history[t]. Steps before 0 repeat x_0;
// a task absent at an early step repeats its earliest row inside the window.
ad::Tensor build_window(std::span<const StateMatrix> history, std::size_t t,
                        std::size_t k);

// W_{t+1} aligned to the entities of history[t]: the window over
// history[0..t] followed by `next`. Departed tasks keep their last row and
// are marked 0 in `survives`.
struct AlignedWindow {
  ad::Tensor window;
  std::vector<std::uint8_t> survives;  // one per entity; hosts always 1
};
AlignedWindow build_next_window(std::span<const StateMatrix> history, std::size_t t,
                                const StateMatrix& next, std::size_t k);

// Per-feature min-max scaling, fitted once and frozen.
class Scaler {
 public:
  Scaler() = default;
  Scaler(std::vector<double> min, std::vector<double> max);

  // Fits over every entry of windows shaped {E, n, k}.
  static Scaler fit(std::span<const ad::Tensor> windows);

  bool fitted() const noexcept { return !min_.empty(); }
  std::size_t features() const noexcept { return min_.size(); }
  const std::vector<double>& min() const noexcept { return min_; }
  const std::vector<double>& max() const noexcept { return max_; }

  // clamp((v - min) / (max - min), 0, 1); 0 for a constant feature.
  double scale(std::size_t feature, double v) const;
  ad::Tensor normalize(const ad::Tensor& window) const;

  void save(const std::string& path) const;
  static Scaler load(const std::string& path);

  bool operator==(const Scaler&) const = default;

 private:
  std::vector<double> min_;
  std::vector<double> max_;
};

}  // namespace ftsched::telemetry
