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
#include <span>
#include <vector>

namespace ftsched::sim {

// p x m placement decision: one row per task, one column per host. Rows are
// one-hot for executable decisions and row-stochastic while relaxed.
class ScheduleMatrix {
 public:
  ScheduleMatrix() = default;
  ScheduleMatrix(std::size_t tasks, std::size_t hosts);
  ScheduleMatrix(std::size_t tasks, std::size_t hosts, std::vector<double> data);

  static ScheduleMatrix from_assignment(std::span<const int> hosts_per_task,
                                        std::size_t hosts);

  std::size_t tasks() const noexcept { return tasks_; }
  std::size_t hosts() const noexcept { return hosts_; }

  double& operator()(std::size_t task, std::size_t host) {
    return data_[task * hosts_ + host];
  }
  double operator()(std::size_t task, std::size_t host) const {
    return data_[task * hosts_ + host];
  }
  std::span<const double> row(std::size_t task) const {
    return {data_.data() + task * hosts_, hosts_};
  }
  const std::vector<double>& data() const noexcept { return data_; }

  // Column of the largest entry; ties resolve to the lowest host index.
  int target(std::size_t task) const;
  std::vector<int> assignment() const;

  bool is_one_hot() const;
  bool is_row_stochastic(double tol = 1e-9) const;

  bool operator==(const ScheduleMatrix&) const = default;

 private:
  std::size_t tasks_ = 0;
  std::size_t hosts_ = 0;
  std::vector<double> data_;
};

}  // namespace ftsched::sim
