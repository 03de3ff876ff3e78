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
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "ftsched/autodiff/tape.hpp"
#include "ftsched/detect/detect.hpp"
#include "ftsched/harness/metrics.hpp"
#include "ftsched/surrogate/model.hpp"
#include "ftsched/telemetry/dataset.hpp"

namespace ftsched::train {

// A record turned into model inputs: normalized windows flattened to
// (E, n*k), the schedule as a (p, m) tensor and a row mask that zeroes
// entities which departed before W_{t+1}.
struct Sample {
  ad::Tensor window;
  ad::Tensor next;
  ad::Tensor mask;
  ad::Tensor schedule;
  std::vector<int> placement;
  std::vector<int> task_host;  // host each task row is scored against (its target)
  std::vector<std::uint8_t> survives;
  std::vector<std::uint8_t> host_faults;
  bool faulty = false;
};

Sample make_sample(const telemetry::Record& record, const telemetry::Scaler& scaler);
std::vector<Sample> make_samples(const telemetry::Dataset& data, const telemetry::Scaler& scaler);

// Row mask (rows, cols) from per-row flags.
ad::Tensor row_mask(std::span<const std::uint8_t> rows, std::size_t cols);

// Sum of squared differences; the masked form ignores rows with mask 0.
ad::Var reconstruction_loss(ad::Var predicted, ad::Var target);
ad::Var reconstruction_loss(ad::Var predicted, ad::Var target, ad::Var mask);

// D(P, c_phi) minus the distances to every other class.
ad::Var triplet_loss(ad::Var prototype, std::size_t phi, const detect::PrototypeStats& stats);
double triplet_loss(std::span<const double> prototype, std::size_t phi,
                    const detect::PrototypeStats& stats);

// Stats before any class has members: mu = 0.5, sigma = 1 for j+1 classes.
detect::PrototypeStats initial_stats(std::size_t fault_classes, std::size_t dims);

// Per-class mean and population std of `prototypes` grouped by `classes`,
// std floored at kSigmaFloor. Classes without members keep `previous`.
detect::PrototypeStats class_stats(std::span<const std::vector<double>> prototypes,
                                   std::span<const std::size_t> classes,
                                   const detect::PrototypeStats& previous);

// classify() applied record by record.
std::vector<std::size_t> assign_classes(std::span<const std::vector<double>> prototypes,
                                        std::span<const std::uint8_t> labels,
                                        const detect::PrototypeStats& stats);

// Eval-mode pass over samples.
struct Evaluation {
  std::vector<double> scores;                  // fault score per sample
  std::vector<std::vector<double>> host_scores;  // per sample, per host
  std::vector<std::vector<double>> prototypes;
  std::vector<double> reconstruction;          // masked L_R per sample
};
Evaluation evaluate(model::Surrogate& model, std::span<const Sample> samples);

// Forwards every sample and recomputes the class stats from `classes`
// (all zeros assigns everything to the no-anomaly class).
detect::PrototypeStats compute_class_stats(model::Surrogate& model,
                                           std::span<const Sample> samples,
                                           std::span<const std::size_t> classes,
                                           const detect::PrototypeStats& previous);

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  std::size_t fault_classes = 3;  // j
  std::size_t max_epochs = 100;
  std::size_t max_steps = 0;      // optimizer steps, 0 for no limit
  std::size_t patience = 5;
  std::size_t batch_size = 1;
  double validation_fraction = 0.1;
  model::ModelConfig model;
  detect::PotConfig pot;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_reconstruction = 0.0;  // mean L_R over training records
  double train_triplet = 0.0;         // mean L_T
  double val_reconstruction = 0.0;
  double detection_accuracy = 0.0;    // POT labels vs simulator ground truth
  double detection_f1 = 0.0;
  std::size_t labeled_faulty = 0;
};

// Scores of the trained model on its training records; online detectors
// calibrate their POT state from these.
struct Calibration {
  std::vector<double> scores;
  std::vector<std::vector<double>> host_scores;
};

struct TrainResult {
  model::Surrogate model;  // parameters of the best validation epoch
  detect::PrototypeStats stats;
  telemetry::Scaler scaler;
  Calibration calibration;
  double threshold = 0.0;  // POT threshold on the calibration scores
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  metrics::DetectionReport detection;  // all records, record-level labels
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Fits the scaler on `data` unless one is given.
TrainResult train_offline(const telemetry::Dataset& data, const TrainConfig& config,
                          const telemetry::Scaler* scaler = nullptr,
                          const EpochCallback& on_epoch = {});

void write_loss_curve(const std::filesystem::path& path, std::span<const EpochStats> curve);

// Checkpoint directory: model.{bin,idx}, stats, scaler, calibration.
void save_result(const std::filesystem::path& dir, const TrainResult& result);
TrainResult load_result(const std::filesystem::path& dir);

}  // namespace ftsched::train
