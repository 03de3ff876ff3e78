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

#include "ftsched/detect/detect.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <string>

#include "ftsched/autodiff/ops.hpp"
#include "ftsched/error.hpp"

namespace ftsched::detect {

FaultScore fault_score(const ad::Tensor& truth, const ad::Tensor& predicted, std::size_t hosts,
                       std::span<const int> task_host, std::span<const std::uint8_t> mask) {
  if (truth.shape() != predicted.shape()) {
    throw DimensionError("fault score of " + ad::shape_str(truth.shape()) + " against " +
                         ad::shape_str(predicted.shape()));
  }
  const std::size_t rows = truth.rows();
  if (rows < hosts || task_host.size() != rows - hosts)
    throw DimensionError("fault score needs one host per task row");
  if (!mask.empty() && mask.size() != rows) throw DimensionError("fault score mask length");
  const std::size_t cols = truth.cols();
  FaultScore out;
  out.per_host.assign(hosts, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask.empty() && mask[r] == 0) continue;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = truth[r * cols + c] - predicted[r * cols + c];
      if (e > 0.0) s += e * e;
    }
    const std::size_t h = r < hosts ? r : static_cast<std::size_t>(task_host[r - hosts]);
    if (h >= hosts) throw DimensionError("task row attributed to host " + std::to_string(h));
    out.per_host[h] += s;
  }
  // Total as the sum of the partials so that they add up exactly.
  out.total = std::accumulate(out.per_host.begin(), out.per_host.end(), 0.0);
  return out;
}

ad::Var fault_score(ad::Var truth, ad::Var predicted, ad::Var mask) {
  return ad::sum(ad::mul(ad::square(ad::relu(ad::sub(truth, predicted))), mask));
}

void PotConfig::validate() const {
  if (!(q > 0.0 && q < 1.0)) throw ParameterError("POT risk q must lie in (0,1)");
  if (n_init == 0) throw ParameterError("POT needs at least one calibration score");
  if (!(init_level > 0.0 && init_level < 1.0))
    throw ParameterError("POT initial level must lie in (0,1)");
}

double empirical_quantile(std::vector<double> v, double level) {
  if (v.empty()) throw ParameterError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(level, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Pot::Pot(PotConfig config) : config_(config) { config_.validate(); }

void Pot::initialize(std::span<const double> scores) {
  if (scores.size() < config_.n_init) {
    throw ParameterError("POT calibration needs " + std::to_string(config_.n_init) +
                         " scores, got " + std::to_string(scores.size()));
  }
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("non-finite score in POT calibration");
  init_threshold_ = empirical_quantile({scores.begin(), scores.end()}, config_.init_level);
  total_ = scores.size();
  peak_count_ = 0;
  excess_sum_ = excess_sq_sum_ = 0.0;
  for (double s : scores) {
    if (s > init_threshold_) {
      const double y = s - init_threshold_;
      ++peak_count_;
      excess_sum_ += y;
      excess_sq_sum_ += y * y;
    }
  }
  initialized_ = true;
  refit();
}

void Pot::refit() {
  if (peak_count_ == 0) {
    gamma_ = 0.0;
    sigma_ = 0.0;
    return;
  }
  const double n = static_cast<double>(peak_count_);
  const double mean = excess_sum_ / n;
  const double var = peak_count_ > 1 ? std::max(0.0, excess_sq_sum_ / n - mean * mean) : 0.0;
  if (var <= 0.0 || mean <= 0.0) {
    // Too few distinct peaks for two moments: exponential tail.
    gamma_ = 0.0;
    sigma_ = std::max(mean, 0.0);
    return;
  }
  const double ratio = mean * mean / var;
  gamma_ = 0.5 * (1.0 - ratio);
  sigma_ = 0.5 * mean * (ratio + 1.0);
}

double Pot::threshold() const { return threshold_at(config_.q); }

double Pot::threshold_at(double q) const {
  if (!initialized_) throw StateError("POT threshold requested before initialization");
  if (!(q > 0.0 && q < 1.0)) throw ParameterError("POT risk q must lie in (0,1)");
  const double t = init_threshold_;
  const double guard = t + 1e-9 * std::max(1.0, std::abs(t));
  if (peak_count_ == 0 || sigma_ <= 0.0) return guard;
  const double r = q * static_cast<double>(total_) / static_cast<double>(peak_count_);
  double z;
  if (std::abs(gamma_) < 1e-12)
    z = t - sigma_ * std::log(r);
  else
    z = t + (sigma_ / gamma_) * (std::pow(r, -gamma_) - 1.0);
  return std::max(z, guard);
}

Pot::Step Pot::update(double score) {
  if (!initialized_) throw StateError("POT update before initialization");
  Step step;
  step.threshold = threshold();
  step.label = fault_label(score, step.threshold);
  if (step.label) return step;
  ++total_;
  if (score > init_threshold_) {
    const double y = score - init_threshold_;
    ++peak_count_;
    excess_sum_ += y;
    excess_sq_sum_ += y * y;
    refit();
  }
  return step;
}

std::optional<Pot> warm_pot(std::span<const double> history, const PotConfig& config) {
  if (history.size() < config.n_init) return std::nullopt;
  Pot pot(config);
  pot.initialize(history.first(config.n_init));
  for (double s : history.subspan(config.n_init)) pot.update(s);
  return pot;
}

PotRun stream_pot(Pot& pot, std::span<const double> scores) {
  PotRun run;
  run.labels.reserve(scores.size());
  run.thresholds.reserve(scores.size());
  for (double s : scores) {
    const auto step = pot.update(s);
    run.labels.push_back(step.label ? 1 : 0);
    run.thresholds.push_back(step.threshold);
  }
  return run;
}

PotRun stream_pot(std::span<const double> scores, const PotConfig& config) {
  PotRun run;
  if (scores.size() < config.n_init) {
    run.labels.assign(scores.size(), 0);
    run.thresholds.assign(scores.size(), std::numeric_limits<double>::infinity());
    return run;
  }
  Pot pot(config);
  const auto head = scores.first(config.n_init);
  pot.initialize(head);
  const double z = pot.threshold();
  for (double s : head) {
    run.labels.push_back(fault_label(s, z) ? 1 : 0);
    run.thresholds.push_back(z);
  }
  auto tail = stream_pot(pot, scores.subspan(config.n_init));
  run.labels.insert(run.labels.end(), tail.labels.begin(), tail.labels.end());
  run.thresholds.insert(run.thresholds.end(), tail.thresholds.begin(), tail.thresholds.end());
  return run;
}

void PrototypeStats::validate() const {
  if (classes.size() < 2) throw ParameterError("prototype stats need c_0 and at least one fault class");
  const std::size_t d = classes[0].mu.size();
  for (const auto& c : classes) {
    if (c.mu.size() != d || c.sigma.size() != d)
      throw DimensionError("prototype stats have inconsistent dimensions");
    for (double s : c.sigma)
      if (!(s >= kSigmaFloor)) throw ParameterError("prototype sigma below floor");
  }
}

double proto_distance(std::span<const double> p, const ClassStats& c) {
  if (p.size() != c.mu.size() || c.sigma.size() != c.mu.size())
    throw DimensionError("prototype of dimension " + std::to_string(p.size()) +
                         " against class of dimension " + std::to_string(c.mu.size()));
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double s2 = c.sigma[i] * c.sigma[i];
    const double diff = c.mu[i] - p[i];
    d += diff * diff / (2.0 * s2) + 0.5 * std::log(s2);
  }
  return d;
}

ad::Var proto_distance(ad::Var p, const ClassStats& c) {
  const std::size_t dims = c.mu.size();
  if (p.value().size() != dims || p.shape() != ad::Shape{1, dims})
    throw DimensionError("prototype " + ad::shape_str(p.shape()) + " against class of dimension " +
                         std::to_string(dims));
  ad::Tensor mu({1, dims}, c.mu);
  ad::Tensor w({1, dims});
  double log_term = 0.0;
  for (std::size_t i = 0; i < dims; ++i) {
    const double s2 = c.sigma[i] * c.sigma[i];
    w[i] = 1.0 / (2.0 * s2);
    log_term += 0.5 * std::log(s2);
  }
  ad::Tape& tape = *p.tape();
  const ad::Var diff = ad::sub(p, tape.constant(std::move(mu)));
  return ad::add_scalar(ad::sum(ad::mul(ad::square(diff), tape.constant(std::move(w)))), log_term);
}

std::size_t classify(std::span<const double> p, const PrototypeStats& stats, bool faulty) {
  if (!faulty) return 0;
  if (stats.classes.size() < 2) throw ParameterError("no fault classes to classify into");
  std::size_t best = 1;
  double best_d = proto_distance(p, stats.classes[1]);
  for (std::size_t i = 2; i < stats.classes.size(); ++i) {
    const double d = proto_distance(p, stats.classes[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Diagnosis diagnose_hosts(std::span<const double> scores, std::span<const double> thresholds) {
  if (scores.size() != thresholds.size())
    throw DimensionError("diagnosis needs one threshold per host score");
  Diagnosis d;
  d.ranking.resize(scores.size());
  std::iota(d.ranking.begin(), d.ranking.end(), 0);
  std::stable_sort(d.ranking.begin(), d.ranking.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  d.labels.resize(scores.size());
  for (std::size_t h = 0; h < scores.size(); ++h)
    d.labels[h] = fault_label(scores[h], thresholds[h]) ? 1 : 0;
  return d;
}

}  // namespace ftsched::detect
