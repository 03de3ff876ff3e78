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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ftsched/autodiff/tensor.hpp"
#include "ftsched/sim/episode.hpp"
#include "ftsched/sim/schedule.hpp"
#include "ftsched/telemetry/window.hpp"

namespace ftsched::telemetry {

// One self-supervision example: raw W_t, the executed S_t and the aligned
// raw W_{t+1} it produced, plus simulator ground truth for I_t.
struct Record {
  int interval = 0;
  std::vector<int> task_ids;
  std::vector<int> placement;  // host before the decision, -1 for arrivals
  ad::Tensor window;           // {m+p, n, k}
  sim::ScheduleMatrix schedule;
  ad::Tensor next_window;      // {m+p, n, k}
  std::vector<std::uint8_t> survives;
  std::vector<std::uint8_t> fault_flags;  // per host
  std::vector<sim::ResourceMask> fault_kinds;

  std::size_t tasks() const noexcept { return task_ids.size(); }
  bool faulty() const;
  bool operator==(const Record&) const = default;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t hosts, std::size_t features, std::size_t window)
      : hosts_(hosts), features_(features), window_(window) {}

  std::size_t hosts() const noexcept { return hosts_; }
  std::size_t features() const noexcept { return features_; }
  std::size_t window() const noexcept { return window_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  // Throws DimensionError when the record's shapes disagree with (m, n, k).
  void append(Record record);

  const Record& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<Record>& records() const noexcept { return records_; }

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t hosts_ = 0;
  std::size_t features_ = kFeatures;
  std::size_t window_ = 0;
  std::vector<Record> records_;
};

// Observation history x_0..x_{T-1} of an episode, one entry per record.
std::vector<StateMatrix> episode_history(const sim::EpisodeLog& log);

Dataset dataset_from_episode(const sim::EpisodeLog& log, std::size_t k);

// Writes `meta`, `records.csv` and, when given, `scaler` into `dir`.
void save_dataset(const std::filesystem::path& dir, const Dataset& data,
                  const Scaler* scaler = nullptr);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace ftsched::telemetry
