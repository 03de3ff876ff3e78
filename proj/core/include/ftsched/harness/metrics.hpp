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
#include <span>
#include <vector>

namespace ftsched::metrics {

// Binary detection scores with faults as the positive class.
struct DetectionReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when a rate had a zero denominator and was reported as 0.
  bool undefined_precision = false;
  bool undefined_recall = false;
};

DetectionReport detection_metrics(std::span<const std::uint8_t> predicted,
                                  std::span<const std::uint8_t> truth);

struct DiagnosisReport {
  double hit_rate = 0.0;
  double ndcg = 0.0;
  std::size_t intervals = 0;  // intervals with a non-empty ground truth
};

// HitRate@100% and NDCG@100%: per interval with g true hosts, only the top g
// of the ranking count. Intervals without faulty hosts are skipped.
DiagnosisReport diagnosis_metrics(const std::vector<std::vector<int>>& rankings,
                                  const std::vector<std::vector<int>>& truth);

// Fraction of intervals where `candidate` QoS strictly beats `reference`.
double improvement_ratio(std::span<const double> candidate, std::span<const double> reference);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace ftsched::metrics
