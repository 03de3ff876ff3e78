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

#include "ftsched/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ftsched/error.hpp"

namespace ftsched::metrics {

DetectionReport detection_metrics(std::span<const std::uint8_t> predicted,
                                  std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size())
    throw DimensionError("detection metrics over " + std::to_string(predicted.size()) +
                         " predictions and " + std::to_string(truth.size()) + " labels");
  DetectionReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0, t = truth[i] != 0;
    if (p && t) ++r.tp;
    else if (p) ++r.fp;
    else if (t) ++r.fn;
    else ++r.tn;
  }
  const auto ratio = [](std::size_t a, std::size_t b, bool& undefined) {
    undefined = b == 0;
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  bool unused = false;
  r.accuracy = ratio(r.tp + r.tn, truth.size(), unused);
  r.precision = ratio(r.tp, r.tp + r.fp, r.undefined_precision);
  r.recall = ratio(r.tp, r.tp + r.fn, r.undefined_recall);
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                      : 0.0;
  return r;
}

DiagnosisReport diagnosis_metrics(const std::vector<std::vector<int>>& rankings,
                                  const std::vector<std::vector<int>>& truth) {
  if (rankings.size() != truth.size())
    throw DimensionError("diagnosis metrics need one ranking per ground-truth set");
  DiagnosisReport r;
  double hr = 0.0, ndcg = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const std::set<int> gt(truth[t].begin(), truth[t].end());
    const std::size_t g = gt.size();
    if (g == 0) continue;
    const std::size_t top = std::min(g, rankings[t].size());
    double hits = 0.0, dcg = 0.0, ideal = 0.0;
    for (std::size_t i = 0; i < top; ++i) {
      if (gt.count(rankings[t][i])) {
        hits += 1.0;
        dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
      }
    }
    for (std::size_t i = 0; i < g; ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    hr += hits / static_cast<double>(g);
    ndcg += dcg / ideal;
    ++r.intervals;
  }
  if (r.intervals > 0) {
    r.hit_rate = hr / static_cast<double>(r.intervals);
    r.ndcg = ndcg / static_cast<double>(r.intervals);
  }
  return r;
}

double improvement_ratio(std::span<const double> candidate, std::span<const double> reference) {
  if (candidate.size() != reference.size())
    throw DimensionError("improvement ratio over unaligned decision logs");
  if (candidate.empty()) return 0.0;
  std::size_t wins = 0;
  for (std::size_t t = 0; t < candidate.size(); ++t)
    if (candidate[t] > reference[t]) ++wins;
  return static_cast<double>(wins) / static_cast<double>(candidate.size());
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t q = i; q <= j; ++q) r[idx[q]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw DimensionError("rank correlation needs two aligned series of length >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace ftsched::metrics
