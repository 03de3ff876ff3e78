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

#include "ftsched/sim/episode.hpp"

#include <fstream>
#include <sstream>

#include "ftsched/error.hpp"
#include "ftsched/io/text.hpp"
#include "ftsched/rng.hpp"

namespace ftsched::sim {

void EpisodeConfig::validate() const {
  sim.validate();
  if (!(lambda >= 0.0)) throw ParameterError("arrival rate must be non-negative");
  if (intervals < 0) throw ParameterError("interval count must be non-negative");
}

NoiseSource EpisodeConfig::noise_source() const {
  return {derive_seed(seed, "noise"), noise};
}

EpisodeLog run_episode(const EpisodeConfig& config, Policy& policy) {
  config.validate();
  EpisodeLog log;
  log.config = config;
  log.policy = policy.name();
  const NoiseSource noise = config.noise_source();
  ClusterState state = initial_state(config.sim);
  log.records.reserve(static_cast<std::size_t>(config.intervals));
  for (int t = 0; t < config.intervals; ++t) {
    Rng rng(derive_seed(config.seed, hash_label("arrivals"), static_cast<std::uint64_t>(t)));
    int next_id = state.next_task_id;
    auto arrivals = spawn_tasks(config.lambda, t, rng, config.sim, next_id);
    const std::size_t count = arrivals.size();
    state = admit(state, std::move(arrivals));
    state.next_task_id = next_id;

    const DecisionContext ctx{state, config, count};
    ScheduleMatrix decision = policy.decide(ctx);
    if (decision.tasks() != state.tasks.size() || decision.hosts() != state.hosts.size()) {
      throw DimensionError("policy '" + policy.name() + "' returned a " +
                           std::to_string(decision.tasks()) + "x" +
                           std::to_string(decision.hosts()) + " schedule at interval " +
                           std::to_string(t) + "; expected " +
                           std::to_string(state.tasks.size()) + "x" +
                           std::to_string(state.hosts.size()));
    }
    StepResult result = step_interval(state, decision, config.sim, noise);
    policy.observe(ctx, decision, result);
    log.records.push_back({state, count, decision, result.outcome});
    state = std::move(result.next);
  }
  log.final_state = std::move(state);
  return log;
}

TraceRow trace_row(const IntervalRecord& record) {
  TraceRow row;
  const ClusterState& s = record.state;
  row.interval = s.interval;
  row.arrivals = record.arrivals;
  for (const auto& u : s.host_usage) row.host_util.insert(row.host_util.end(), u.begin(), u.end());
  for (const auto& task : s.tasks) {
    row.task_ids.push_back(task.id);
    row.task_usage.insert(row.task_usage.end(), task.usage.begin(), task.usage.end());
  }
  row.schedule = record.schedule.data();
  const IntervalOutcome& o = record.outcome;
  row.art = o.art;
  row.aec = o.aec;
  row.art_raw = o.art_raw;
  row.energy = o.energy;
  row.completions = o.completions;
  row.slo_violations = o.slo_violations;
  row.migrations = o.migrations;
  row.migration_time = o.migration_time;
  row.fault_flags.assign(o.fault_flags.begin(), o.fault_flags.end());
  row.fault_kinds.assign(o.fault_kinds.begin(), o.fault_kinds.end());
  return row;
}

namespace {

constexpr const char* kResourceSuffix[] = {"cpu", "ram", "disk"};

}  // namespace

void write_trace(const std::filesystem::path& dir, const EpisodeLog& log) {
  std::filesystem::create_directories(dir);
  const auto& c = log.config;
  io::KeyValues meta;
  meta["format"] = "ftsched-trace 1";
  meta["policy"] = log.policy;
  meta["m"] = std::to_string(c.sim.hosts);
  meta["n"] = std::to_string(kResources);
  meta["k"] = std::to_string(c.sim.label_window);
  meta["T"] = std::to_string(c.intervals);
  meta["seed"] = std::to_string(c.seed);
  meta["lambda"] = io::format_double(c.lambda);
  meta["noise"] = c.noise == NoiseMode::kNominal ? "nominal" : "realized";
  for (std::size_t p = 0; p < kProfiles; ++p) {
    const auto& prof = c.sim.profiles[p];
    const std::string key = "profile." + std::string(profile_name(static_cast<AppProfile>(p)));
    meta[key + ".demand"] = io::join(prof.demand, ';');
    meta[key + ".work"] = io::format_double(prof.work_min) + ";" + io::format_double(prof.work_max);
    meta[key + ".slo"] = io::format_double(c.sim.slo_deadline[p]);
  }
  io::write_key_values((dir / "meta").string(), meta);

  std::ofstream out(dir / "trace.csv");
  if (!out) throw IoError("cannot write " + (dir / "trace.csv").string());
  out << "t,arrivals";
  for (std::size_t h = 0; h < c.sim.hosts; ++h)
    for (const char* r : kResourceSuffix) out << ",h" << h << '_' << r;
  out << ",task_ids,task_usage,schedule,art,aec,art_raw,energy,completions,"
         "slo_violations,migrations,migration_time,fault_flags,fault_kinds\n";
  for (const auto& record : log.records) {
    const TraceRow row = trace_row(record);
    out << row.interval << ',' << row.arrivals;
    for (double u : row.host_util) out << ',' << io::format_double(u);
    out << ',' << io::join(row.task_ids, ';') << ',' << io::join(row.task_usage, ';') << ','
        << io::join(row.schedule, ';') << ',' << io::format_double(row.art) << ','
        << io::format_double(row.aec) << ',' << io::format_double(row.art_raw) << ','
        << io::format_double(row.energy) << ',' << row.completions << ','
        << row.slo_violations << ',' << row.migrations << ','
        << io::format_double(row.migration_time) << ',' << io::join(row.fault_flags, ';')
        << ',' << io::join(row.fault_kinds, ';') << '\n';
  }
  if (!out) throw IoError("failed writing trace in " + dir.string());
}

Trace read_trace(const std::filesystem::path& dir) {
  Trace trace;
  trace.meta = io::read_key_values((dir / "meta").string());
  const auto m_it = trace.meta.find("m");
  if (m_it == trace.meta.end()) throw IoError("trace meta lacks m");
  const auto m = static_cast<std::size_t>(io::parse_int(m_it->second));

  std::ifstream in(dir / "trace.csv");
  if (!in) throw IoError("cannot open " + (dir / "trace.csv").string());
  std::string line;
  std::getline(in, line);  // header
  const std::size_t expected = 2 + m * kResources + 13;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    if (f.size() != expected) {
      throw IoError("trace row has " + std::to_string(f.size()) + " fields, expected " +
                    std::to_string(expected));
    }
    TraceRow row;
    std::size_t i = 0;
    row.interval = static_cast<int>(io::parse_int(f[i++]));
    row.arrivals = static_cast<std::size_t>(io::parse_int(f[i++]));
    for (std::size_t j = 0; j < m * kResources; ++j) row.host_util.push_back(io::parse_double(f[i++]));
    row.task_ids = io::parse_ints(f[i++], ';');
    row.task_usage = io::parse_doubles(f[i++], ';');
    row.schedule = io::parse_doubles(f[i++], ';');
    row.art = io::parse_double(f[i++]);
    row.aec = io::parse_double(f[i++]);
    row.art_raw = io::parse_double(f[i++]);
    row.energy = io::parse_double(f[i++]);
    row.completions = static_cast<std::size_t>(io::parse_int(f[i++]));
    row.slo_violations = static_cast<std::size_t>(io::parse_int(f[i++]));
    row.migrations = static_cast<std::size_t>(io::parse_int(f[i++]));
    row.migration_time = io::parse_double(f[i++]);
    row.fault_flags = io::parse_ints(f[i++], ';');
    row.fault_kinds = io::parse_ints(f[i++], ';');
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

}  // namespace ftsched::sim
