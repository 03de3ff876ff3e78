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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftsched/detect/detect.hpp"
#include "ftsched/harness/metrics.hpp"
#include "ftsched/sched/policies.hpp"
#include "ftsched/sim/episode.hpp"
#include "ftsched/telemetry/dataset.hpp"
#include "ftsched/train/train.hpp"

namespace ftsched::harness {

struct ExperimentConfig {
  std::size_t hosts = 8;   // m
  std::size_t window = 5;  // k
  int intervals = 100;     // T
  double lambda = 5.0;
  std::vector<std::uint64_t> seeds{1};
  double alpha = 0.5;
  double beta = 0.5;
  std::string policy = "deepft";  // random | reactive_threshold | gobi_ref | deepft
  sim::SimConfig sim;
  bool calibrate_slo = true;
  sched::OptConfig opt;
  sched::FineTuneConfig tune;
  bool fine_tune = true;
  detect::PotConfig pot;
  std::filesystem::path checkpoint;  // trained model directory
  std::filesystem::path output;      // empty: nothing written
  bool parallel = true;              // seeds on separate threads

  void validate() const;
  sim::EpisodeConfig episode(std::uint64_t seed) const;
};

// Every policy name accepted by the harness.
std::span<const std::string_view> policy_names();

// Per-profile 90th-percentile response time of a gobi_ref run on a
// calibration stream derived from the episode seed. Profiles that never
// complete keep their configured deadline.
std::array<double, sim::kProfiles> calibrate_slo(const sim::EpisodeConfig& episode, double alpha,
                                                 double beta);

// Detection and diagnosis of a trained model on a dataset. Record-level
// POT on the total score and one POT per host, each warmed on the
// training scores and updated in streaming fashion.
struct DetectionEval {
  metrics::DetectionReport detection;
  metrics::DiagnosisReport diagnosis;
  std::vector<double> scores;
  std::vector<double> thresholds;
  std::vector<std::uint8_t> labels;
  std::vector<std::vector<double>> host_scores;
  std::vector<std::vector<double>> host_thresholds;
};
DetectionEval evaluate_detection(model::Surrogate& model, const train::Calibration& calibration,
                                 const telemetry::Scaler& scaler, const telemetry::Dataset& data,
                                 const detect::PotConfig& pot);

// QoS-side metrics of one episode from its trace rows and completed tasks.
struct QosMetrics {
  double qos_mean = 0.0;
  double energy_per_task = 0.0;  // joules per completed task
  double art = 0.0;              // mean response time (s)
  std::array<double, sim::kProfiles> art_per_app{};
  double slo_fraction = 0.0;
  std::array<double, sim::kProfiles> slo_per_app{};
  double fairness = 0.0;  // Jain over response times
  double migrations = 0.0;
  double migration_time = 0.0;  // seconds, summed
  double completions = 0.0;
  double fault_fraction = 0.0;  // intervals with any ground-truth fault
};
QosMetrics qos_metrics(std::span<const sim::TraceRow> rows,
                       std::span<const sim::CompletedTask> completed, double alpha, double beta);

// Ordered name -> value; the names are fixed regardless of configuration.
using MetricRow = std::vector<std::pair<std::string, double>>;

struct SeedResult {
  std::uint64_t seed = 0;
  MetricRow metrics;
  double overhead_ratio = 0.0;  // decision time relative to gobi_ref, not in metrics.csv
  std::vector<sched::DeepFtInterval> deepft;  // empty for other policies
};

struct ExperimentResult {
  std::string policy;
  double lambda = 0.0;
  std::vector<SeedResult> seeds;
  MetricRow mean;
  MetricRow stddev;
  double overhead_ratio = 0.0;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// metrics.csv (long format: policy, lambda, seed, metric, value; seed
// "mean" and "std" rows close each group), summary.json, trajectory.csv,
// attention.csv.
void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result,
                      const ExperimentConfig& config);
void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const ExperimentResult> results);

std::vector<ExperimentResult> sweep_lambda(const ExperimentConfig& base,
                                           std::span<const double> lambdas);

double metric(const MetricRow& row, std::string_view name);

// Fraction of DeepFT intervals whose last L_O is at most the first.
double descent_fraction(std::span<const sched::DeepFtInterval> intervals);

void write_completions(const std::filesystem::path& path,
                       std::span<const sim::CompletedTask> completed);
std::vector<sim::CompletedTask> read_completions(const std::filesystem::path& path);

}  // namespace ftsched::harness
