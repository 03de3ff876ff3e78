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
#include <optional>
#include <span>
#include <vector>

#include "ftsched/autodiff/tape.hpp"
#include "ftsched/autodiff/tensor.hpp"

namespace ftsched::detect {

// ||ReLU(W - W_hat)||^2 with per-host partial sums. Rows are entities
// (m hosts, then tasks); `task_host[i]` receives the error of task row i.
// Rows whose `mask` entry is 0 are ignored (pass an empty mask to keep all).
struct FaultScore {
  double total = 0.0;
  std::vector<double> per_host;
};
FaultScore fault_score(const ad::Tensor& truth, const ad::Tensor& predicted, std::size_t hosts,
                       std::span<const int> task_host, std::span<const std::uint8_t> mask = {});

// Differentiable total score; `mask` is a (rows, cols) constant of 0/1.
ad::Var fault_score(ad::Var truth, ad::Var predicted, ad::Var mask);

// Strict: equal to the threshold is not a fault.
constexpr bool fault_label(double score, double threshold) noexcept { return score > threshold; }

struct PotConfig {
  double q = 1e-2;            // risk level
  std::size_t n_init = 120;   // calibration scores
  double init_level = 0.98;   // empirical quantile for the initial threshold
  void validate() const;
};

// Streaming peaks-over-threshold with a generalized Pareto tail fitted by the
// method of moments.
class Pot {
 public:
  explicit Pot(PotConfig config = {});

  // Calibrates on `scores` (at least n_init of them): the initial threshold
  // is their init_level quantile and every exceedance becomes a peak.
  void initialize(std::span<const double> scores);
  bool initialized() const noexcept { return initialized_; }

  // Threshold at the configured risk, or at `q` for the same fitted tail.
  double threshold() const;
  double threshold_at(double q) const;

  struct Step {
    bool label = false;
    double threshold = 0.0;  // the one the score was compared with
  };
  // Labels `score` against the current threshold. Non-alarm scores above the
  // initial threshold join the peak set and the tail is refitted.
  Step update(double score);

  double initial_threshold() const noexcept { return init_threshold_; }
  double shape() const noexcept { return gamma_; }
  double scale() const noexcept { return sigma_; }
  std::size_t peaks() const noexcept { return peak_count_; }
  std::size_t total() const noexcept { return total_; }
  const PotConfig& config() const noexcept { return config_; }

 private:
  void refit();

  PotConfig config_;
  bool initialized_ = false;
  double init_threshold_ = 0.0;
  double gamma_ = 0.0;
  double sigma_ = 0.0;
  std::size_t peak_count_ = 0;
  std::size_t total_ = 0;
  double excess_sum_ = 0.0;
  double excess_sq_sum_ = 0.0;
};

// A POT initialized on the first n_init of `history` and updated with the
// rest in order; empty when the history is shorter than n_init.
std::optional<Pot> warm_pot(std::span<const double> history, const PotConfig& config);

struct PotRun {
  std::vector<std::uint8_t> labels;
  std::vector<double> thresholds;  // the one each score was compared with
};

// Streams `scores` through `pot`.
PotRun stream_pot(Pot& pot, std::span<const double> scores);

// SPOT over a single stream: the first n_init scores initialize the POT and
// are judged against its initial fitted threshold, the rest update it. With
// fewer than n_init scores nothing is labeled and thresholds are infinite.
PotRun stream_pot(std::span<const double> scores, const PotConfig& config);


// Linear-interpolated empirical quantile (level in [0,1]).
double empirical_quantile(std::vector<double> values, double level);

inline constexpr double kSigmaFloor = 1e-2;

struct ClassStats {
  std::vector<double> mu;
  std::vector<double> sigma;  // floored at kSigmaFloor
  bool operator==(const ClassStats&) const = default;
};

// Class 0 is the no-anomaly prototype; 1..j are fault classes.
struct PrototypeStats {
  std::vector<ClassStats> classes;
  std::size_t fault_classes() const noexcept { return classes.empty() ? 0 : classes.size() - 1; }
  std::size_t dims() const noexcept { return classes.empty() ? 0 : classes[0].mu.size(); }
  void validate() const;
  bool operator==(const PrototypeStats&) const = default;
};

// Sum over dims of (mu - P)^2 / (2 sigma^2) + ln(sigma^2) / 2.
double proto_distance(std::span<const double> p, const ClassStats& c);
ad::Var proto_distance(ad::Var p, const ClassStats& c);

// 0 when not faulty, else argmin over classes 1..j (ties to the lower index).
std::size_t classify(std::span<const double> p, const PrototypeStats& stats, bool faulty);

struct Diagnosis {
  std::vector<int> ranking;            // hosts by descending score
  std::vector<std::uint8_t> labels;    // per host
};
Diagnosis diagnose_hosts(std::span<const double> scores, std::span<const double> thresholds);

}  // namespace ftsched::detect
