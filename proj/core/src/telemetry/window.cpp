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

#include "ftsched/telemetry/window.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "ftsched/error.hpp"
#include "ftsched/io/text.hpp"

namespace ftsched::telemetry {

StateMatrix observe(const sim::ClusterState& state, bool placed_only) {
  StateMatrix x;
  x.hosts = state.hosts.size();
  if (state.host_usage.size() != x.hosts)
    throw DimensionError("cluster state has usage for " + std::to_string(state.host_usage.size()) +
                         " of " + std::to_string(x.hosts) + " hosts");
  sim::ResourceVec mean_cap{};
  for (const auto& h : state.hosts)
    for (std::size_t r = 0; r < kFeatures; ++r) mean_cap[r] += h.capacity[r] / x.hosts;

  x.values.reserve((x.hosts + state.tasks.size()) * kFeatures);
  for (const auto& u : state.host_usage) x.values.insert(x.values.end(), u.begin(), u.end());
  for (const auto& task : state.tasks) {
    if (placed_only && task.host < 0) continue;
    x.task_ids.push_back(task.id);
    for (std::size_t r = 0; r < kFeatures; ++r) x.values.push_back(task.usage[r] / mean_cap[r]);
  }
  return x;
}

namespace {

using RowIndex = std::unordered_map<int, std::size_t>;

RowIndex index_tasks(const StateMatrix& x) {
  RowIndex idx;
  idx.reserve(x.task_ids.size());
  for (std::size_t i = 0; i < x.task_ids.size(); ++i) idx.emplace(x.task_ids[i], x.hosts + i);
  return idx;
}

// Fills out[e, :, slot] from `src` row `row`.
void put(ad::Tensor& out, std::size_t e, std::size_t slot, std::size_t k,
         std::span<const double> row) {
  for (std::size_t f = 0; f < kFeatures; ++f) out[(e * kFeatures + f) * k + slot] = row[f];
}

// Window over `steps` (oldest first, length k) for the entities of `anchor`.
// Task rows missing at a step take the nearest later step where they exist;
// rows missing from the end take the nearest earlier one.
ad::Tensor assemble(std::span<const StateMatrix* const> steps, const StateMatrix& anchor,
                    std::vector<std::uint8_t>* survives) {
  const std::size_t k = steps.size();
  const std::size_t E = anchor.rows();
  for (const StateMatrix* s : steps) {
    if (s->hosts != anchor.hosts) throw DimensionError("host count changes inside a window");
  }
  ad::Tensor out({E, kFeatures, k});
  std::vector<RowIndex> idx;
  idx.reserve(k);
  for (const StateMatrix* s : steps) idx.push_back(index_tasks(*s));

  for (std::size_t h = 0; h < anchor.hosts; ++h)
    for (std::size_t j = 0; j < k; ++j) put(out, h, j, k, steps[j]->row(h));

  if (survives) survives->assign(E, 1);
  for (std::size_t i = 0; i < anchor.task_ids.size(); ++i) {
    const std::size_t e = anchor.hosts + i;
    const int id = anchor.task_ids[i];
    std::vector<long> row_at(k, -1);
    for (std::size_t j = 0; j < k; ++j) {
      auto it = idx[j].find(id);
      if (it != idx[j].end()) row_at[j] = static_cast<long>(it->second);
    }
    // Backward fill from later steps, then forward fill for trailing gaps.
    long later = -1;
    std::size_t later_step = 0;
    for (std::size_t jj = k; jj-- > 0;) {
      if (row_at[jj] >= 0) {
        later = row_at[jj];
        later_step = jj;
        continue;
      }
      if (later >= 0) put(out, e, jj, k, steps[later_step]->row(static_cast<std::size_t>(later)));
    }
    long earlier = -1;
    std::size_t earlier_step = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (row_at[j] >= 0) {
        put(out, e, j, k, steps[j]->row(static_cast<std::size_t>(row_at[j])));
        earlier = row_at[j];
        earlier_step = j;
      } else if (earlier >= 0) {
        put(out, e, j, k, steps[earlier_step]->row(static_cast<std::size_t>(earlier)));
        if (survives && j + 1 == k) (*survives)[e] = 0;
      }
    }
    if (earlier < 0) throw DimensionError("task " + std::to_string(id) + " absent from its window");
  }
  return out;
}

}  // namespace

ad::Tensor build_window(std::span<const StateMatrix> history, std::size_t t, std::size_t k) {
  if (history.empty()) throw DimensionError("cannot build a window from an empty history");
  if (k == 0) throw ParameterError("window length must be positive");
  if (t >= history.size())
    throw DimensionError("window end " + std::to_string(t) + " beyond history of length " +
                         std::to_string(history.size()));
  std::vector<const StateMatrix*> steps(k);
  for (std::size_t j = 0; j < k; ++j) {
    const long s = static_cast<long>(t) - static_cast<long>(k - 1 - j);
    steps[j] = &history[static_cast<std::size_t>(std::max(0L, s))];
  }
  return assemble(steps, history[t], nullptr);
}

AlignedWindow build_next_window(std::span<const StateMatrix> history, std::size_t t,
                                const StateMatrix& next, std::size_t k) {
  if (history.empty()) throw DimensionError("cannot build a window from an empty history");
  if (k == 0) throw ParameterError("window length must be positive");
  if (t >= history.size()) throw DimensionError("window end beyond history");
  std::vector<const StateMatrix*> steps(k);
  for (std::size_t j = 0; j + 1 < k; ++j) {
    const long s = static_cast<long>(t) + 1 - static_cast<long>(k - 1 - j);
    steps[j] = &history[static_cast<std::size_t>(std::max(0L, s))];
  }
  steps[k - 1] = &next;
  AlignedWindow out;
  out.window = assemble(steps, history[t], &out.survives);
  return out;
}

Scaler::Scaler(std::vector<double> min, std::vector<double> max)
    : min_(std::move(min)), max_(std::move(max)) {
  if (min_.size() != max_.size()) throw DimensionError("scaler min/max lengths differ");
  for (std::size_t f = 0; f < min_.size(); ++f)
    if (!(max_[f] >= min_[f])) throw ParameterError("scaler max below min");
}

Scaler Scaler::fit(std::span<const ad::Tensor> windows) {
  if (windows.empty()) throw DimensionError("cannot fit a scaler on no windows");
  std::vector<double> lo(kFeatures, std::numeric_limits<double>::infinity());
  std::vector<double> hi(kFeatures, -std::numeric_limits<double>::infinity());
  for (const auto& w : windows) {
    if (w.rank() != 3 || w.shape()[1] != kFeatures)
      throw DimensionError("scaler expects {E, n, k} windows, got " + ad::shape_str(w.shape()));
    const std::size_t E = w.shape()[0], k = w.shape()[2];
    for (std::size_t e = 0; e < E; ++e)
      for (std::size_t f = 0; f < kFeatures; ++f)
        for (std::size_t j = 0; j < k; ++j) {
          const double v = w[(e * kFeatures + f) * k + j];
          lo[f] = std::min(lo[f], v);
          hi[f] = std::max(hi[f], v);
        }
  }
  return Scaler(std::move(lo), std::move(hi));
}

double Scaler::scale(std::size_t f, double v) const {
  const double range = max_[f] - min_[f];
  if (range <= 0.0) return 0.0;
  return std::clamp((v - min_[f]) / range, 0.0, 1.0);
}

ad::Tensor Scaler::normalize(const ad::Tensor& w) const {
  if (!fitted()) throw StateError("scaler used before fitting");
  if (w.rank() != 3 || w.shape()[1] != min_.size())
    throw DimensionError("window shape " + ad::shape_str(w.shape()) +
                         " does not match scaler features");
  ad::Tensor out(w.shape());
  const std::size_t E = w.shape()[0], n = w.shape()[1], k = w.shape()[2];
  for (std::size_t e = 0; e < E; ++e)
    for (std::size_t f = 0; f < n; ++f)
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t i = (e * n + f) * k + j;
        out[i] = scale(f, w[i]);
      }
  return out;
}

void Scaler::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "# feature min max\n";
  for (std::size_t f = 0; f < min_.size(); ++f)
    out << f << ' ' << io::format_double(min_[f]) << ' ' << io::format_double(max_[f]) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

Scaler Scaler::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<double> lo, hi;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto parts = io::split(line, ' ');
    if (parts.size() != 3 || static_cast<std::size_t>(io::parse_int(parts[0])) != lo.size())
      throw IoError("malformed scaler line in " + path + ": " + line);
    lo.push_back(io::parse_double(parts[1]));
    hi.push_back(io::parse_double(parts[2]));
  }
  if (lo.empty()) throw IoError("empty scaler file " + path);
  return Scaler(std::move(lo), std::move(hi));
}

}  // namespace ftsched::telemetry
