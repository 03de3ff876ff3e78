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

#include "ftsched/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "ftsched/error.hpp"
#include "ftsched/io/text.hpp"
#include "ftsched/rng.hpp"

namespace ftsched::harness {

namespace {

constexpr std::string_view kPolicies[] = {"random", "reactive_threshold", "gobi_ref", "deepft"};

}  // namespace

std::span<const std::string_view> policy_names() { return kPolicies; }

void ExperimentConfig::validate() const {
  if (hosts < 1) throw ParameterError("need at least one host");
  if (window < 1) throw ParameterError("window must be at least 1");
  if (intervals < 1) throw ParameterError("need at least one interval");
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be non-negative");
  if (seeds.empty()) throw ParameterError("need at least one seed");
  if (alpha < 0.0 || beta < 0.0 || alpha + beta > 1.0 + 1e-12)
    throw ParameterError("alpha and beta must be non-negative with alpha + beta <= 1");
  if (std::find(std::begin(kPolicies), std::end(kPolicies), policy) == std::end(kPolicies))
    throw ParameterError("unknown policy '" + policy + "'");
  if (policy == "deepft" && checkpoint.empty())
    throw ParameterError("the deepft policy needs a trained checkpoint");
  sim::SimConfig s = sim;
  s.hosts = hosts;
  s.validate();
  opt.validate();
  pot.validate();
}

sim::EpisodeConfig ExperimentConfig::episode(std::uint64_t seed) const {
  sim::EpisodeConfig e;
  e.sim = sim;
  e.sim.hosts = hosts;
  e.lambda = lambda;
  e.intervals = intervals;
  e.seed = seed;
  return e;
}

std::array<double, sim::kProfiles> calibrate_slo(const sim::EpisodeConfig& episode, double alpha,
                                                 double beta) {
  sim::EpisodeConfig cal = episode;
  cal.seed = derive_seed(episode.seed, hash_label("slo-calibration"));
  sched::GobiPolicy gobi(alpha, beta);
  const auto log = sim::run_episode(cal, gobi);
  std::array<double, sim::kProfiles> out = episode.sim.slo_deadline;
  for (std::size_t p = 0; p < sim::kProfiles; ++p) {
    std::vector<double> times;
    for (const auto& c : log.final_state.completed)
      if (static_cast<std::size_t>(c.profile) == p) times.push_back(c.response_time);
    if (!times.empty()) out[p] = detect::empirical_quantile(std::move(times), 0.9);
  }
  return out;
}

namespace {

// Streams `scores` through a POT warmed on `calibration`; nothing is labeled
// when the calibration is too short.
detect::PotRun calibrated_stream(std::span<const double> calibration,
                                 std::span<const double> scores,
                                 const detect::PotConfig& config) {
  auto pot = detect::warm_pot(calibration, config);
  if (pot) return detect::stream_pot(*pot, scores);
  detect::PotRun run;
  run.labels.assign(scores.size(), 0);
  run.thresholds.assign(scores.size(), std::numeric_limits<double>::infinity());
  return run;
}

}  // namespace

DetectionEval evaluate_detection(model::Surrogate& model, const train::Calibration& calibration,
                                 const telemetry::Scaler& scaler, const telemetry::Dataset& data,
                                 const detect::PotConfig& pot) {
  const auto samples = train::make_samples(data, scaler);
  const auto ev = train::evaluate(model, samples);
  DetectionEval out;
  out.scores = ev.scores;
  out.host_scores = ev.host_scores;
  auto run = calibrated_stream(calibration.scores, ev.scores, pot);
  out.labels = std::move(run.labels);
  out.thresholds = std::move(run.thresholds);

  std::vector<std::uint8_t> truth;
  for (const auto& s : samples) truth.push_back(s.faulty ? 1 : 0);
  out.detection = metrics::detection_metrics(out.labels, truth);

  const std::size_t m = data.hosts();
  out.host_thresholds.assign(samples.size(), std::vector<double>(m, 0.0));
  for (std::size_t h = 0; h < m; ++h) {
    std::vector<double> cal, scores;
    for (const auto& row : calibration.host_scores) cal.push_back(row.at(h));
    for (const auto& row : ev.host_scores) scores.push_back(row[h]);
    const auto run = calibrated_stream(cal, scores, pot);
    for (std::size_t i = 0; i < samples.size(); ++i) out.host_thresholds[i][h] = run.thresholds[i];
  }
  std::vector<std::vector<int>> rankings, sets;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rankings.push_back(detect::diagnose_hosts(ev.host_scores[i], out.host_thresholds[i]).ranking);
    std::vector<int> gt;
    for (std::size_t h = 0; h < m; ++h)
      if (samples[i].host_faults[h]) gt.push_back(static_cast<int>(h));
    sets.push_back(std::move(gt));
  }
  out.diagnosis = metrics::diagnosis_metrics(rankings, sets);
  return out;
}

QosMetrics qos_metrics(std::span<const sim::TraceRow> rows,
                       std::span<const sim::CompletedTask> completed, double alpha, double beta) {
  QosMetrics q;
  double energy = 0.0;
  std::size_t faulty = 0;
  for (const auto& r : rows) {
    q.qos_mean += 1.0 - alpha * r.art - beta * r.aec;
    energy += r.energy;
    q.migrations += static_cast<double>(r.migrations);
    q.migration_time += r.migration_time;
    q.completions += static_cast<double>(r.completions);
    if (std::any_of(r.fault_flags.begin(), r.fault_flags.end(), [](int f) { return f != 0; }))
      ++faulty;
  }
  if (!rows.empty()) {
    q.qos_mean /= static_cast<double>(rows.size());
    q.fault_fraction = static_cast<double>(faulty) / static_cast<double>(rows.size());
  }
  if (q.completions > 0.0) q.energy_per_task = energy / q.completions;

  std::array<double, sim::kProfiles> sum{}, count{}, violated{};
  std::vector<double> times;
  for (const auto& c : completed) {
    const auto p = static_cast<std::size_t>(c.profile);
    sum[p] += c.response_time;
    count[p] += 1.0;
    violated[p] += c.slo_violated ? 1.0 : 0.0;
    times.push_back(c.response_time);
  }
  const double total = std::accumulate(count.begin(), count.end(), 0.0);
  if (total > 0.0) {
    q.art = std::accumulate(sum.begin(), sum.end(), 0.0) / total;
    q.slo_fraction = std::accumulate(violated.begin(), violated.end(), 0.0) / total;
    q.fairness = sim::jain_fairness(times);
  }
  for (std::size_t p = 0; p < sim::kProfiles; ++p) {
    if (count[p] > 0.0) {
      q.art_per_app[p] = sum[p] / count[p];
      q.slo_per_app[p] = violated[p] / count[p];
    }
  }
  return q;
}

double metric(const MetricRow& row, std::string_view name) {
  for (const auto& [k, v] : row)
    if (k == name) return v;
  throw ParameterError("no metric named '" + std::string(name) + "'");
}

double descent_fraction(std::span<const sched::DeepFtInterval> intervals) {
  if (intervals.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& in : intervals)
    if (!in.trajectory.empty() && in.trajectory.back().loss <= in.trajectory.front().loss) ++ok;
  return static_cast<double>(ok) / static_cast<double>(intervals.size());
}

namespace {

class TimedPolicy final : public sim::Policy {
 public:
  explicit TimedPolicy(sim::Policy& inner) : inner_(inner) {}
  std::string name() const override { return inner_.name(); }
  sim::ScheduleMatrix decide(const sim::DecisionContext& ctx) override {
    const auto start = std::chrono::steady_clock::now();
    auto s = inner_.decide(ctx);
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
  }
  void observe(const sim::DecisionContext& ctx, const sim::ScheduleMatrix& decision,
               const sim::StepResult& result) override {
    inner_.observe(ctx, decision, result);
  }
  double seconds = 0.0;

 private:
  sim::Policy& inner_;
};

std::vector<sim::TraceRow> rows_of(const sim::EpisodeLog& log) {
  std::vector<sim::TraceRow> rows;
  rows.reserve(log.records.size());
  for (const auto& r : log.records) rows.push_back(sim::trace_row(r));
  return rows;
}

SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed,
                    const std::optional<train::TrainResult>& bundle) {
  sim::EpisodeConfig ep = config.episode(seed);
  if (config.calibrate_slo) ep.sim.slo_deadline = calibrate_slo(ep, config.alpha, config.beta);

  std::unique_ptr<sim::Policy> policy;
  sched::DeepFtPolicy* deepft = nullptr;
  if (config.policy == "random") {
    policy = std::make_unique<sched::RandomPolicy>(derive_seed(seed, hash_label("random")));
  } else if (config.policy == "reactive_threshold") {
    policy = std::make_unique<sched::ReactivePolicy>();
  } else if (config.policy == "gobi_ref") {
    policy = std::make_unique<sched::GobiPolicy>(config.alpha, config.beta);
  } else {
    sched::DeepFtConfig dc;
    dc.opt = config.opt;
    dc.tune = config.tune;
    dc.fine_tune = config.fine_tune;
    dc.pot = config.pot;
    dc.seed = derive_seed(seed, hash_label("deepft"));
    auto p = std::make_unique<sched::DeepFtPolicy>(*bundle, dc);
    deepft = p.get();
    policy = std::move(p);
  }
  TimedPolicy timed(*policy);
  const sim::EpisodeLog log = sim::run_episode(ep, timed);

  sim::EpisodeLog reference;
  if (config.policy == "gobi_ref") {
    reference = log;
  } else {
    sched::GobiPolicy gobi(config.alpha, config.beta);
    reference = sim::run_episode(ep, gobi);
  }

  // Same-state comparison: the reference decision on every state the policy
  // faced, both executed on the co-simulator with the episode's noise.
  const sim::NoiseSource noise = ep.noise_source();
  const sim::NoiseSource planning = ep.planning_noise();
  std::vector<double> own, ref, own_traj, ref_traj;
  double gobi_seconds = 0.0;
  for (const auto& r : log.records) {
    own.push_back(sim::compute_qos(r.outcome, config.alpha, config.beta));
    const auto start = std::chrono::steady_clock::now();
    const auto g = sched::gobi_schedule(r.state, ep.sim, planning, config.alpha, config.beta);
    gobi_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ref.push_back(sched::cosim_qos(r.state, g, ep.sim, noise, config.alpha, config.beta));
  }
  for (const auto& r : reference.records)
    ref_traj.push_back(sim::compute_qos(r.outcome, config.alpha, config.beta));
  own_traj = own;

  const auto rows = rows_of(log);
  const QosMetrics q = qos_metrics(rows, log.final_state.completed, config.alpha, config.beta);

  SeedResult out;
  out.seed = seed;
  out.overhead_ratio = gobi_seconds > 0.0 ? timed.seconds / gobi_seconds : 0.0;

  DetectionEval det;
  if (bundle) {
    model::Surrogate model = bundle->model;
    const auto data = telemetry::dataset_from_episode(reference, config.window);
    det = evaluate_detection(model, bundle->calibration, bundle->scaler, data, config.pot);
  }
  if (deepft) out.deepft = deepft->intervals();

  auto& m = out.metrics;
  m = {{"qos_mean", q.qos_mean},
       {"energy_per_task", q.energy_per_task},
       {"art", q.art},
       {"art_compute", q.art_per_app[0]},
       {"art_memory", q.art_per_app[1]},
       {"art_balanced", q.art_per_app[2]},
       {"slo_fraction", q.slo_fraction},
       {"slo_compute", q.slo_per_app[0]},
       {"slo_memory", q.slo_per_app[1]},
       {"slo_balanced", q.slo_per_app[2]},
       {"fairness", q.fairness},
       {"migrations", q.migrations},
       {"migration_time", q.migration_time},
       {"completions", q.completions},
       {"fault_fraction", q.fault_fraction},
       {"improvement_ratio", metrics::improvement_ratio(own, ref)},
       {"improvement_ratio_trajectory", metrics::improvement_ratio(own_traj, ref_traj)},
       {"accuracy", det.detection.accuracy},
       {"precision", det.detection.precision},
       {"recall", det.detection.recall},
       {"f1", det.detection.f1},
       {"hit_rate", det.diagnosis.hit_rate},
       {"ndcg", det.diagnosis.ndcg},
       {"descent_fraction", descent_fraction(out.deepft)},
       {"deadline_compute", ep.sim.slo_deadline[0]},
       {"deadline_memory", ep.sim.slo_deadline[1]},
       {"deadline_balanced", ep.sim.slo_deadline[2]}};

  if (!config.output.empty()) {
    const auto dir = config.output / ("seed_" + std::to_string(seed));
    sim::write_trace(dir / "trace", log);
    write_completions(dir / "completions.csv", log.final_state.completed);
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::optional<train::TrainResult> bundle;
  if (!config.checkpoint.empty()) {
    bundle = train::load_result(config.checkpoint);
    if (bundle->model.config().hosts != config.hosts || bundle->model.config().window != config.window)
      throw DimensionError("checkpoint was trained for m=" +
                           std::to_string(bundle->model.config().hosts) + ", k=" +
                           std::to_string(bundle->model.config().window));
  }

  ExperimentResult result;
  result.policy = config.policy;
  result.lambda = config.lambda;
  if (config.parallel && config.seeds.size() > 1) {
    std::vector<std::future<SeedResult>> jobs;
    for (auto seed : config.seeds)
      jobs.push_back(std::async(std::launch::async, [&config, &bundle, seed] {
        return run_seed(config, seed, bundle);
      }));
    for (auto& j : jobs) result.seeds.push_back(j.get());
  } else {
    for (auto seed : config.seeds) result.seeds.push_back(run_seed(config, seed, bundle));
  }

  const auto& names = result.seeds.front().metrics;
  const double n = static_cast<double>(result.seeds.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    double mean = 0.0;
    for (const auto& s : result.seeds) mean += s.metrics[i].second;
    mean /= n;
    double var = 0.0;
    for (const auto& s : result.seeds) var += (s.metrics[i].second - mean) * (s.metrics[i].second - mean);
    result.mean.emplace_back(names[i].first, mean);
    result.stddev.emplace_back(names[i].first, std::sqrt(var / n));
  }
  for (const auto& s : result.seeds) result.overhead_ratio += s.overhead_ratio / n;

  if (!config.output.empty()) write_experiment(config.output, result, config);
  return result;
}

void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const ExperimentResult> results) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "policy,lambda,seed,metric,value\n";
  for (const auto& r : results) {
    const std::string lam = io::format_double(r.lambda);
    for (const auto& s : r.seeds)
      for (const auto& [k, v] : s.metrics)
        out << r.policy << ',' << lam << ',' << s.seed << ',' << k << ',' << io::format_double(v)
            << '\n';
    for (const auto& [k, v] : r.mean)
      out << r.policy << ',' << lam << ",mean," << k << ',' << io::format_double(v) << '\n';
    for (const auto& [k, v] : r.stddev)
      out << r.policy << ',' << lam << ",std," << k << ',' << io::format_double(v) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result,
                      const ExperimentConfig& config) {
  std::filesystem::create_directories(dir);
  write_metrics_csv(dir / "metrics.csv", std::span(&result, 1));

  nlohmann::ordered_json j;
  j["policy"] = result.policy;
  j["lambda"] = result.lambda;
  j["hosts"] = config.hosts;
  j["intervals"] = config.intervals;
  j["seeds"] = config.seeds;
  j["alpha"] = config.alpha;
  j["beta"] = config.beta;
  for (const auto& [k, v] : result.mean) j["mean"][k] = v;
  for (const auto& [k, v] : result.stddev) j["std"][k] = v;
  j["overhead_ratio"] = result.overhead_ratio;
  for (const auto& s : result.seeds) j["overhead_ratio_per_seed"].push_back(s.overhead_ratio);
  std::ofstream js(dir / "summary.json");
  if (!js) throw IoError("cannot write summary.json in " + dir.string());
  js << j.dump(2) << '\n';

  std::ofstream traj(dir / "trajectory.csv");
  std::ofstream att(dir / "attention.csv");
  if (!traj || !att) throw IoError("cannot write trajectory/attention in " + dir.string());
  traj << "seed,interval,iteration,loss,nap_distance,learning_rate,chosen_class,prototype,decision\n";
  att << "seed,interval,kind,row,weights\n";
  for (const auto& s : result.seeds) {
    for (const auto& in : s.deepft) {
      for (const auto& it : in.trajectory)
        traj << s.seed << ',' << in.interval << ',' << it.iteration << ','
             << io::format_double(it.loss) << ',' << io::format_double(it.nap_distance) << ','
             << io::format_double(it.learning_rate) << ',' << it.chosen_class << ','
             << io::join(it.prototype, ';') << ',' << io::join(it.decision, ';') << '\n';
      auto dump = [&](const char* kind, const ad::Tensor& t) {
        const std::size_t cols = t.cols();
        for (std::size_t r = 0; r < t.rows(); ++r)
          att << s.seed << ',' << in.interval << ',' << kind << ',' << r << ','
              << io::join(t.data().subspan(r * cols, cols), ';') << '\n';
      };
      dump("time", in.time_attention);
      dump("decision", in.decision_attention);
    }
  }
}

std::vector<ExperimentResult> sweep_lambda(const ExperimentConfig& base,
                                           std::span<const double> lambdas) {
  std::vector<ExperimentResult> out;
  for (double lam : lambdas) {
    ExperimentConfig c = base;
    c.lambda = lam;
    if (!base.output.empty()) c.output = base.output / ("lambda_" + io::format_double(lam));
    out.push_back(run_experiment(c));
  }
  if (!base.output.empty()) {
    std::filesystem::create_directories(base.output);
    write_metrics_csv(base.output / "sweep.csv", out);
  }
  return out;
}

void write_completions(const std::filesystem::path& path,
                       std::span<const sim::CompletedTask> completed) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,profile,arrival,completion,response_time,slo_violated\n";
  for (const auto& c : completed)
    out << c.id << ',' << static_cast<int>(c.profile) << ',' << c.arrival_interval << ','
        << c.completion_interval << ',' << io::format_double(c.response_time) << ','
        << (c.slo_violated ? 1 : 0) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<sim::CompletedTask> read_completions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing " + path.string());
  std::vector<sim::CompletedTask> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    if (f.size() != 6) throw IoError("corrupted completion row in " + path.string());
    sim::CompletedTask c;
    c.id = static_cast<int>(io::parse_int(f[0]));
    const auto p = io::parse_int(f[1]);
    if (p < 0 || p >= static_cast<long long>(sim::kProfiles))
      throw IoError("unknown profile in " + path.string());
    c.profile = static_cast<sim::AppProfile>(p);
    c.arrival_interval = static_cast<int>(io::parse_int(f[2]));
    c.completion_interval = static_cast<int>(io::parse_int(f[3]));
    c.response_time = io::parse_double(f[4]);
    c.slo_violated = io::parse_int(f[5]) != 0;
    out.push_back(c);
  }
  return out;
}

}  // namespace ftsched::harness
