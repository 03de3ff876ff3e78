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

#include "ftsched/telemetry/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "ftsched/error.hpp"
#include "ftsched/io/text.hpp"

namespace ftsched::telemetry {

bool Record::faulty() const {
  return std::any_of(fault_flags.begin(), fault_flags.end(), [](auto f) { return f != 0; });
}

void Dataset::append(Record r) {
  const std::size_t E = hosts_ + r.task_ids.size();
  const ad::Shape expect{E, features_, window_};
  auto fail = [&](const std::string& what) {
    throw DimensionError("record at interval " + std::to_string(r.interval) + ": " + what);
  };
  if (r.window.shape() != expect)
    fail("window shape " + ad::shape_str(r.window.shape()) + ", expected " + ad::shape_str(expect));
  if (r.next_window.shape() != expect)
    fail("next window shape " + ad::shape_str(r.next_window.shape()) + ", expected " +
         ad::shape_str(expect));
  if (r.schedule.tasks() != r.task_ids.size() || r.schedule.hosts() != hosts_)
    fail("schedule is " + std::to_string(r.schedule.tasks()) + "x" +
         std::to_string(r.schedule.hosts()));
  if (r.placement.size() != r.task_ids.size()) fail("placement length mismatch");
  if (r.survives.size() != E) fail("survival mask length mismatch");
  if (r.fault_flags.size() != hosts_ || r.fault_kinds.size() != hosts_)
    fail("fault labels do not cover every host");
  records_.push_back(std::move(r));
}

std::vector<StateMatrix> episode_history(const sim::EpisodeLog& log) {
  std::vector<StateMatrix> out;
  out.reserve(log.records.size());
  for (const auto& rec : log.records) out.push_back(observe(rec.state));
  return out;
}

Dataset dataset_from_episode(const sim::EpisodeLog& log, std::size_t k) {
  Dataset data(log.config.sim.hosts, kFeatures, k);
  const auto history = episode_history(log);
  for (std::size_t t = 0; t < log.records.size(); ++t) {
    const auto& rec = log.records[t];
    const sim::ClusterState& after =
        t + 1 < log.records.size() ? log.records[t + 1].state : log.final_state;
    const StateMatrix next = observe(after, /*placed_only=*/true);

    Record r;
    r.interval = rec.state.interval;
    for (const auto& task : rec.state.tasks) {
      r.task_ids.push_back(task.id);
      r.placement.push_back(task.host);
    }
    r.window = build_window(history, t, k);
    r.schedule = rec.schedule;
    auto aligned = build_next_window(history, t, next, k);
    r.next_window = std::move(aligned.window);
    r.survives = std::move(aligned.survives);
    r.fault_flags = rec.outcome.fault_flags;
    r.fault_kinds = rec.outcome.fault_kinds;
    data.append(std::move(r));
  }
  return data;
}

namespace {

template <typename T>
std::vector<int> as_ints(const std::vector<T>& v) {
  return {v.begin(), v.end()};
}

template <typename T>
std::vector<T> from_ints(const std::vector<int>& v) {
  std::vector<T> out;
  out.reserve(v.size());
  for (int x : v) out.push_back(static_cast<T>(x));
  return out;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const Dataset& data, const Scaler* scaler) {
  std::filesystem::create_directories(dir);
  io::KeyValues meta;
  meta["format"] = "ftsched-dataset 1";
  meta["m"] = std::to_string(data.hosts());
  meta["n"] = std::to_string(data.features());
  meta["k"] = std::to_string(data.window());
  meta["records"] = std::to_string(data.size());
  io::write_key_values((dir / "meta").string(), meta);

  std::ofstream out(dir / "records.csv");
  if (!out) throw IoError("cannot write " + (dir / "records.csv").string());
  out << "interval,task_ids,placement,window,schedule,next_window,survives,fault_flags,"
         "fault_kinds\n";
  for (const Record& r : data.records()) {
    out << r.interval << ',' << io::join(r.task_ids, ';') << ',' << io::join(r.placement, ';')
        << ',' << io::join(r.window.data(), ';') << ',' << io::join(r.schedule.data(), ';')
        << ',' << io::join(r.next_window.data(), ';') << ','
        << io::join(as_ints(r.survives), ';') << ',' << io::join(as_ints(r.fault_flags), ';')
        << ',' << io::join(as_ints(r.fault_kinds), ';') << '\n';
  }
  if (!out) throw IoError("failed writing dataset in " + dir.string());
  if (scaler) scaler->save((dir / "scaler").string());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto meta = io::read_key_values((dir / "meta").string());
  auto get = [&](const char* key) -> std::size_t {
    auto it = meta.find(key);
    if (it == meta.end()) throw IoError("dataset meta lacks '" + std::string(key) + "'");
    return static_cast<std::size_t>(io::parse_int(it->second));
  };
  if (auto it = meta.find("format"); it == meta.end() || it->second != "ftsched-dataset 1")
    throw IoError("not a dataset directory: " + dir.string());
  const std::size_t m = get("m"), n = get("n"), k = get("k"), count = get("records");
  Dataset data(m, n, k);

  std::ifstream in(dir / "records.csv");
  if (!in) throw IoError("missing " + (dir / "records.csv").string());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    if (f.size() != 9) throw IoError("corrupted dataset row in " + dir.string());
    Record r;
    r.interval = static_cast<int>(io::parse_int(f[0]));
    r.task_ids = io::parse_ints(f[1], ';');
    r.placement = io::parse_ints(f[2], ';');
    const std::size_t E = m + r.task_ids.size();
    auto window_data = io::parse_doubles(f[3], ';');
    auto next_data = io::parse_doubles(f[5], ';');
    auto sched_data = io::parse_doubles(f[4], ';');
    if (window_data.size() != E * n * k || next_data.size() != E * n * k ||
        sched_data.size() != r.task_ids.size() * m)
      throw IoError("dataset row at interval " + std::to_string(r.interval) +
                    " has inconsistent lengths");
    r.window = ad::Tensor({E, n, k}, std::move(window_data));
    r.schedule = sim::ScheduleMatrix(r.task_ids.size(), m, std::move(sched_data));
    r.next_window = ad::Tensor({E, n, k}, std::move(next_data));
    r.survives = from_ints<std::uint8_t>(io::parse_ints(f[6], ';'));
    r.fault_flags = from_ints<std::uint8_t>(io::parse_ints(f[7], ';'));
    r.fault_kinds = from_ints<sim::ResourceMask>(io::parse_ints(f[8], ';'));
    data.append(std::move(r));
  }
  if (data.size() != count)
    throw IoError("dataset " + dir.string() + " declares " + std::to_string(count) +
                  " records but holds " + std::to_string(data.size()));
  return data;
}

}  // namespace ftsched::telemetry
