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

#include "ftsched/surrogate/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "ftsched/autodiff/checkpoint.hpp"
#include "ftsched/error.hpp"
#include "ftsched/rng.hpp"

namespace ftsched::model {

using ad::Shape;
using ad::Tensor;
using ad::Var;

void ModelConfig::validate() const {
  if (hosts == 0) throw ParameterError("model needs at least one host");
  if (features == 0 || window == 0) throw ParameterError("model needs n >= 1 and k >= 1");
  if (hidden == 0 || heads == 0 || hidden % heads != 0)
    throw ParameterError("hidden size must be a positive multiple of the head count");
  if (proto == 0) throw ParameterError("prototype dimension must be positive");
}

Tensor MigrationGraph::in_adjacency() const {
  Tensor a({hosts, hosts});
  for (auto [from, to] : edges) a.at(static_cast<std::size_t>(to), static_cast<std::size_t>(from)) = 1.0;
  return a;
}

MigrationGraph build_migration_graph(std::span<const double> schedule, std::size_t hosts,
                                     std::span<const int> placement) {
  if (hosts == 0) throw ParameterError("graph needs at least one host");
  if (schedule.size() != placement.size() * hosts) {
    throw DimensionError("schedule with " + std::to_string(schedule.size()) +
                         " entries does not match " + std::to_string(placement.size()) +
                         " placed tasks over " + std::to_string(hosts) + " hosts");
  }
  std::set<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < placement.size(); ++i) {
    const int from = placement[i];
    if (from < 0) continue;
    if (static_cast<std::size_t>(from) >= hosts)
      throw DimensionError("placement refers to host " + std::to_string(from));
    const double* row = schedule.data() + i * hosts;
    const auto to = static_cast<int>(std::max_element(row, row + hosts) - row);
    if (to != from) edges.emplace(from, to);
  }
  MigrationGraph g;
  g.hosts = hosts;
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

namespace {

struct Spec {
  std::string name;
  Shape shape;
  enum Kind { kWeight, kZero, kOne, kSmall } kind;
};

std::vector<Spec> layout(const ModelConfig& c) {
  const std::size_t n = c.features, k = c.window, d = c.hidden, m = c.hosts;
  std::vector<Spec> s;
  auto weight = [&](std::string name, std::size_t in, std::size_t out) {
    s.push_back({std::move(name), {in, out}, Spec::kWeight});
  };
  auto bias = [&](std::string name, std::size_t out) {
    s.push_back({std::move(name), {1, out}, Spec::kZero});
  };
  auto norm = [&](const std::string& prefix) {
    s.push_back({prefix + ".g", {1, d}, Spec::kOne});
    s.push_back({prefix + ".b", {1, d}, Spec::kZero});
  };
  auto attention = [&](const std::string& prefix) {
    for (const char* w : {"q", "k", "v", "o"}) {
      weight(prefix + ".w" + w, d, d);
      bias(prefix + ".b" + w, d);
    }
  };

  weight("embed.w", n, d);
  bias("embed.b", d);
  s.push_back({"embed.pos", {k, d}, Spec::kSmall});
  attention("tatt");
  norm("tnorm");

  weight("graph.w", n, d);
  bias("graph.b", d);
  for (std::size_t q = 1; q <= c.rounds; ++q) weight("graph.conv" + std::to_string(q), d, d);
  for (const char* w : {"w_ir", "w_iz", "w_in", "w_hr", "w_hz", "w_hn"}) weight(std::string("gru.") + w, d, d);
  for (const char* b : {"b_r", "b_z", "b_in", "b_hn"}) bias(std::string("gru.") + b, d);

  weight("dec.w", m, d);
  bias("dec.b", d);
  norm("dec.bn");

  weight("fuse.w", 2 * d, d);
  bias("fuse.b", d);
  weight("score.w", 2 * d, 1);
  bias("score.b", 1);

  attention("satt");
  norm("snorm");

  weight("out.w", 2 * d, n * k);
  bias("out.b", n * k);
  weight("proto.w", d, c.proto);
  bias("proto.b", c.proto);
  return s;
}

// Selects the n features of time step j from a (rows, n*k) window.
Tensor step_selector(std::size_t n, std::size_t k, std::size_t j) {
  Tensor sel({n * k, n});
  for (std::size_t f = 0; f < n; ++f) sel.at(f * k + j, f) = 1.0;
  return sel;
}

}  // namespace

Surrogate::Surrogate(ModelConfig config) : config_(config) {
  config_.validate();
  for (const Spec& s : layout(config_)) {
    Tensor t(s.shape);
    switch (s.kind) {
      case Spec::kZero:
        break;
      case Spec::kOne:
        t.fill(1.0);
        break;
      case Spec::kWeight:
      case Spec::kSmall: {
        const double fan = static_cast<double>(s.shape[0] + s.shape[1]);
        const double a = s.kind == Spec::kSmall ? 0.1 : std::sqrt(6.0 / fan);
        Rng rng(derive_seed(config_.seed, hash_label("init"), hash_label(s.name)));
        std::uniform_real_distribution<double> u(-a, a);
        for (auto& v : t.data()) v = u(rng);
        break;
      }
    }
    params_.emplace(s.name, std::move(t));
  }
  bn_ = ad::BatchNormBuffers::make(config_.hidden);
}

std::size_t Surrogate::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : params_) total += t.size();
  return total;
}

namespace {
Var p_of(const std::map<std::string, Var>& b, const std::string& name) { return b.at(name); }
}  // namespace

Var Surrogate::mha(const Bindings& b, Var q_in, Var k_in, Var v_in, const std::string& prefix,
                   Tensor* avg_attention) const {
  auto p = [&](const std::string& name) { return p_of(b, name); };
  const std::size_t d = config_.hidden, h = config_.heads, dh = d / h;
  const Var q = ad::linear(q_in, p(prefix + ".wq"), p(prefix + ".bq"));
  const Var k = ad::linear(k_in, p(prefix + ".wk"), p(prefix + ".bk"));
  const Var v = ad::linear(v_in, p(prefix + ".wv"), p(prefix + ".bv"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(h);
  for (std::size_t hh = 0; hh < h; ++hh) {
    const Var qh = ad::slice_cols(q, hh * dh, (hh + 1) * dh);
    const Var kh = ad::slice_cols(k, hh * dh, (hh + 1) * dh);
    const Var vh = ad::slice_cols(v, hh * dh, (hh + 1) * dh);
    const Var a = ad::softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)), scale), 1);
    if (avg_attention) {
      if (hh == 0) *avg_attention = Tensor(a.shape());
      for (std::size_t i = 0; i < a.value().size(); ++i)
        (*avg_attention)[i] += a.value()[i] / static_cast<double>(h);
    }
    heads.push_back(ad::matmul(a, vh));
  }
  return ad::linear(ad::concat(heads, 1), p(prefix + ".wo"), p(prefix + ".bo"));
}

// Causal self-attention across the k steps of every entity. Scores are
// formed per (query step, key step) pair so cost stays linear in the number
// of entities; key steps after the query step are never formed.
std::vector<Var> Surrogate::time_attention(const Bindings& b,
                                           const std::vector<Var>& steps) const {
  auto p = [&](const std::string& name) { return p_of(b, name); };
  const std::size_t k = steps.size(), d = config_.hidden, h = config_.heads, dh = d / h;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> q(k), key(k), v(k);
  for (std::size_t j = 0; j < k; ++j) {
    q[j] = ad::linear(steps[j], p("tatt.wq"), p("tatt.bq"));
    key[j] = ad::linear(steps[j], p("tatt.wk"), p("tatt.bk"));
    v[j] = ad::linear(steps[j], p("tatt.wv"), p("tatt.bv"));
  }
  std::vector<Var> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<Var> heads;
    heads.reserve(h);
    for (std::size_t hh = 0; hh < h; ++hh) {
      const Var qh = ad::slice_cols(q[i], hh * dh, (hh + 1) * dh);
      std::vector<Var> scores;
      std::vector<Var> values;
      for (std::size_t j = 0; j <= i; ++j) {
        const Var kh = ad::slice_cols(key[j], hh * dh, (hh + 1) * dh);
        scores.push_back(ad::scale(ad::sum_cols(ad::mul(qh, kh)), scale));
        values.push_back(ad::slice_cols(v[j], hh * dh, (hh + 1) * dh));
      }
      const Var a = ad::softmax(ad::concat(scores, 1), 1);
      Var acc = ad::mul(ad::repeat_cols(ad::slice_cols(a, 0, 1), dh), values[0]);
      for (std::size_t j = 1; j <= i; ++j)
        acc = ad::add(acc, ad::mul(ad::repeat_cols(ad::slice_cols(a, j, j + 1), dh), values[j]));
      heads.push_back(acc);
    }
    const Var o = ad::linear(ad::concat(heads, 1), p("tatt.wo"), p("tatt.bo"));
    out[i] = ad::layer_norm(ad::add(steps[i], o), p("tnorm.g"), p("tnorm.b"));
  }
  return out;
}

Outputs Surrogate::forward(ad::Tape& tape, const Inputs& in, bool train, bool param_grads) {
  std::map<std::string, Var> bindings;
  for (auto& [name, t] : params_) bindings.emplace(name, tape.leaf(t, param_grads));
  return forward_with(tape, in, train, std::move(bindings));
}

Outputs Surrogate::forward_with(ad::Tape& tape, const Inputs& in, bool train,
                                std::map<std::string, Var> bindings) {
  const std::size_t m = config_.hosts, n = config_.features, k = config_.window,
                    d = config_.hidden;
  const std::size_t rows = in.window.rows();
  if (in.window.shape() != Shape{rows, n * k} || rows < m) {
    throw DimensionError("window " + ad::shape_str(in.window.shape()) + " does not fit m=" +
                         std::to_string(m) + ", n*k=" + std::to_string(n * k));
  }
  const std::size_t tasks = rows - m;
  if (in.schedule.shape() != Shape{tasks, m}) {
    throw DimensionError("schedule " + ad::shape_str(in.schedule.shape()) + " for " +
                         std::to_string(tasks) + " task rows and " + std::to_string(m) + " hosts");
  }
  if (in.placement.size() != tasks) throw DimensionError("placement length differs from task rows");

  for (const auto& [name, t] : params_) {
    auto it = bindings.find(name);
    if (it == bindings.end()) throw ParameterError("no binding for parameter '" + name + "'");
    if (it->second.shape() != t.shape())
      throw DimensionError("binding for '" + name + "' has shape " +
                           ad::shape_str(it->second.shape()));
  }
  auto p = [&](const std::string& name) { return p_of(bindings, name); };

  Outputs out;

  // Token embeddings per time step, (E, d) each.
  std::vector<Var> steps(k);
  for (std::size_t j = 0; j < k; ++j) {
    const Var proj = ad::matmul(tape.constant(step_selector(n, k, j)), p("embed.w"));
    const Var pos = ad::add(p("embed.b"), ad::slice_rows(p("embed.pos"), j, j + 1));
    steps[j] = ad::add(ad::matmul(in.window, proj), ad::repeat_rows(pos, rows));
  }
  const std::vector<Var> ew2 = time_attention(bindings, steps);

  // Gated graph encoder over the migration graph.
  const MigrationGraph graph = build_migration_graph(in.schedule.value().data(), m, in.placement);
  const Var adj = tape.constant(graph.in_adjacency());
  const Var host_x = ad::matmul(ad::slice_rows(in.window, 0, m),
                                tape.constant(step_selector(n, k, k - 1)));
  Var e = ad::tanh(ad::linear(host_x, p("graph.w"), p("graph.b")));
  const ad::GruWeights gru{p("gru.w_ir"), p("gru.w_iz"), p("gru.w_in"), p("gru.w_hr"),
                           p("gru.w_hz"), p("gru.w_hn"), p("gru.b_r"),  p("gru.b_z"),
                           p("gru.b_in"), p("gru.b_hn")};
  for (std::size_t q = 1; q <= config_.rounds; ++q) {
    const Var x = ad::matmul(adj, ad::matmul(e, p("graph.conv" + std::to_string(q))));
    e = ad::gru_cell(e, x, gru);
  }
  const Var eh = e;  // (m, d)

  // Decision encoding and per-entity contexts.
  Var es;
  Var ctx_h = eh;
  Var ctx_s;
  if (tasks > 0) {
    es = ad::relu(ad::batch_norm(ad::linear(in.schedule, p("dec.w"), p("dec.b")), p("dec.bn.g"),
                                 p("dec.bn.b"), bn_, train));
    ctx_h = ad::concat({eh, ad::matmul(in.schedule, eh)}, 0);
    const Var host_s =
        ad::scale(ad::matmul(ad::transpose(in.schedule), es), 1.0 / static_cast<double>(tasks));
    ctx_s = ad::concat({host_s, es}, 0);
  } else {
    ctx_s = tape.constant(Tensor({m, d}));
  }

  // Step attention conditioned on the decision.
  std::vector<Var> e3(k), scores(k);
  for (std::size_t j = 0; j < k; ++j) {
    e3[j] = ad::relu(ad::linear(ad::concat({ew2[j], ctx_h}, 1), p("fuse.w"), p("fuse.b")));
    scores[j] = ad::linear(ad::concat({ew2[j], ctx_s}, 1), p("score.w"), p("score.b"));
  }
  const Var attn = ad::softmax(ad::concat(scores, 1), 1);
  out.time_attention = attn.value();
  Var ew = ad::mul(ad::repeat_cols(ad::slice_cols(attn, 0, 1), d), e3[0]);
  for (std::size_t j = 1; j < k; ++j)
    ew = ad::add(ew, ad::mul(ad::repeat_cols(ad::slice_cols(attn, j, j + 1), d), e3[j]));

  // Decision self-attention with window values, pooled over tasks.
  Var pooled;
  if (tasks > 0) {
    const Var ew_tasks = ad::slice_rows(ew, m, rows);
    const Var att = mha(bindings, es, es, ew_tasks, "satt", &out.decision_attention);
    const Var es2 = ad::relu(ad::layer_norm(ad::add(es, att), p("snorm.g"), p("snorm.b")));
    pooled = ad::mean_rows(es2);
  } else {
    pooled = tape.constant(Tensor({1, d}));
    out.decision_attention = Tensor({0, 0});
  }
  out.pooled = pooled;

  const Var dec_in = ad::concat({ad::repeat_rows(pooled, rows), ew}, 1);
  out.reconstruction = ad::sigmoid(ad::linear(dec_in, p("out.w"), p("out.b")));
  out.prototype = ad::sigmoid(ad::linear(pooled, p("proto.w"), p("proto.b")));
  out.params = std::move(bindings);
  return out;
}

ad::ParamMap Surrogate::gradients(const ad::Tape& tape, const Outputs& pass) {
  ad::ParamMap grads;
  for (const auto& [name, v] : pass.params) grads.emplace(name, tape.grad(v));
  return grads;
}

ad::ParamMap Surrogate::state() const {
  ad::ParamMap s = params_;
  s.emplace("buffer.bn.mean", bn_.running_mean);
  s.emplace("buffer.bn.var", bn_.running_var);
  const ModelConfig& c = config_;
  // The seed goes in two 32-bit halves so that doubles hold it exactly.
  s.emplace("config", Tensor({1, 9}, {static_cast<double>(c.hosts), static_cast<double>(c.features),
                                      static_cast<double>(c.window), static_cast<double>(c.hidden),
                                      static_cast<double>(c.heads), static_cast<double>(c.proto),
                                      static_cast<double>(c.rounds),
                                      static_cast<double>(c.seed & 0xffffffffULL),
                                      static_cast<double>(c.seed >> 32)}));
  return s;
}

void Surrogate::load_state(const ad::ParamMap& state) {
  for (auto& [name, t] : params_) {
    auto it = state.find(name);
    if (it == state.end()) throw IoError("checkpoint lacks parameter '" + name + "'");
    if (it->second.shape() != t.shape())
      throw DimensionError("checkpoint parameter '" + name + "' has shape " +
                           ad::shape_str(it->second.shape()) + ", expected " +
                           ad::shape_str(t.shape()));
    t = it->second;
  }
  auto mean = state.find("buffer.bn.mean");
  auto var = state.find("buffer.bn.var");
  if (mean == state.end() || var == state.end()) throw IoError("checkpoint lacks batch-norm buffers");
  bn_.running_mean = mean->second;
  bn_.running_var = var->second;
}

void Surrogate::save(const std::filesystem::path& stem) const { ad::save_tensors(stem, state()); }

Surrogate Surrogate::load(const std::filesystem::path& stem) {
  const ad::ParamMap s = ad::load_tensors(stem);
  auto it = s.find("config");
  if (it == s.end() || it->second.size() != 9) throw IoError("checkpoint lacks model config");
  const auto& v = it->second;
  ModelConfig c;
  c.hosts = static_cast<std::size_t>(v[0]);
  c.features = static_cast<std::size_t>(v[1]);
  c.window = static_cast<std::size_t>(v[2]);
  c.hidden = static_cast<std::size_t>(v[3]);
  c.heads = static_cast<std::size_t>(v[4]);
  c.proto = static_cast<std::size_t>(v[5]);
  c.rounds = static_cast<std::size_t>(v[6]);
  c.seed = static_cast<std::uint64_t>(v[7]) | (static_cast<std::uint64_t>(v[8]) << 32);
  Surrogate model(c);
  model.load_state(s);
  return model;
}

std::uint64_t Surrogate::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : params_) {
    h ^= hash_label(name);
    for (double x : t.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof(bits));
      h = mix64(h ^ bits);
    }
  }
  return h;
}

}  // namespace ftsched::model
