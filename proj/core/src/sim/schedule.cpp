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

#include "ftsched/sim/schedule.hpp"

#include <cmath>
#include <string>

#include "ftsched/error.hpp"

namespace ftsched::sim {

ScheduleMatrix::ScheduleMatrix(std::size_t tasks, std::size_t hosts)
    : tasks_(tasks), hosts_(hosts), data_(tasks * hosts, 0.0) {}

ScheduleMatrix::ScheduleMatrix(std::size_t tasks, std::size_t hosts,
                               std::vector<double> data)
    : tasks_(tasks), hosts_(hosts), data_(std::move(data)) {
  if (data_.size() != tasks * hosts) {
    throw DimensionError("schedule data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(tasks) + "x" +
                         std::to_string(hosts));
  }
}

ScheduleMatrix ScheduleMatrix::from_assignment(std::span<const int> hosts_per_task,
                                               std::size_t hosts) {
  ScheduleMatrix s(hosts_per_task.size(), hosts);
  for (std::size_t i = 0; i < hosts_per_task.size(); ++i) {
    const int h = hosts_per_task[i];
    if (h < 0 || static_cast<std::size_t>(h) >= hosts) {
      throw ParameterError("assignment of task row " + std::to_string(i) +
                           " to host " + std::to_string(h) + " out of range");
    }
    s(i, static_cast<std::size_t>(h)) = 1.0;
  }
  return s;
}

int ScheduleMatrix::target(std::size_t task) const {
  std::size_t best = 0;
  for (std::size_t h = 1; h < hosts_; ++h)
    if ((*this)(task, h) > (*this)(task, best)) best = h;
  return static_cast<int>(best);
}

std::vector<int> ScheduleMatrix::assignment() const {
  std::vector<int> out(tasks_);
  for (std::size_t i = 0; i < tasks_; ++i) out[i] = target(i);
  return out;
}

bool ScheduleMatrix::is_one_hot() const {
  for (std::size_t i = 0; i < tasks_; ++i) {
    int ones = 0;
    for (std::size_t h = 0; h < hosts_; ++h) {
      const double v = (*this)(i, h);
      if (v == 1.0)
        ++ones;
      else if (v != 0.0)
        return false;
    }
    if (ones != 1) return false;
  }
  return true;
}

bool ScheduleMatrix::is_row_stochastic(double tol) const {
  for (std::size_t i = 0; i < tasks_; ++i) {
    double s = 0.0;
    for (std::size_t h = 0; h < hosts_; ++h) {
      const double v = (*this)(i, h);
      if (v < -tol || v > 1.0 + tol) return false;
      s += v;
    }
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

}  // namespace ftsched::sim
