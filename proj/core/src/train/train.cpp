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

#include "ftsched/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "ftsched/autodiff/ops.hpp"
#include "ftsched/autodiff/optim.hpp"
#include "ftsched/error.hpp"
#include "ftsched/io/text.hpp"

namespace ftsched::train {

using ad::Tensor;
using ad::Var;

ad::Tensor row_mask(std::span<const std::uint8_t> rows, std::size_t cols) {
  Tensor m({rows.size(), cols});
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r]) std::fill_n(m.data().begin() + static_cast<std::ptrdiff_t>(r * cols), cols, 1.0);
  return m;
}

Sample make_sample(const telemetry::Record& record, const telemetry::Scaler& scaler) {
  const auto& shape = record.window.shape();
  const std::size_t rows = shape[0], cols = shape[1] * shape[2];
  Sample s;
  s.window = scaler.normalize(record.window).reshaped({rows, cols});
  s.next = scaler.normalize(record.next_window).reshaped({rows, cols});
  s.mask = row_mask(record.survives, cols);
  s.schedule = Tensor({record.schedule.tasks(), record.schedule.hosts()}, record.schedule.data());
  s.placement = record.placement;
  s.task_host = record.schedule.assignment();
  s.survives = record.survives;
  s.host_faults = record.fault_flags;
  s.faulty = record.faulty();
  return s;
}

std::vector<Sample> make_samples(const telemetry::Dataset& data, const telemetry::Scaler& scaler) {
  std::vector<Sample> out;
  out.reserve(data.size());
  for (const auto& r : data.records()) out.push_back(make_sample(r, scaler));
  return out;
}

Var reconstruction_loss(Var predicted, Var target) {
  return ad::sum(ad::square(ad::sub(predicted, target)));
}

Var reconstruction_loss(Var predicted, Var target, Var mask) {
  return ad::sum(ad::mul(ad::square(ad::sub(predicted, target)), mask));
}

Var triplet_loss(Var prototype, std::size_t phi, const detect::PrototypeStats& stats) {
  if (phi >= stats.classes.size())
    throw ParameterError("class " + std::to_string(phi) + " outside 0.." +
                         std::to_string(stats.classes.size() - 1));
  Var loss = detect::proto_distance(prototype, stats.classes[phi]);
  for (std::size_t i = 0; i < stats.classes.size(); ++i)
    if (i != phi) loss = ad::sub(loss, detect::proto_distance(prototype, stats.classes[i]));
  return loss;
}

double triplet_loss(std::span<const double> prototype, std::size_t phi,
                    const detect::PrototypeStats& stats) {
  if (phi >= stats.classes.size())
    throw ParameterError("class " + std::to_string(phi) + " outside 0.." +
                         std::to_string(stats.classes.size() - 1));
  double loss = detect::proto_distance(prototype, stats.classes[phi]);
  for (std::size_t i = 0; i < stats.classes.size(); ++i)
    if (i != phi) loss -= detect::proto_distance(prototype, stats.classes[i]);
  return loss;
}

detect::PrototypeStats initial_stats(std::size_t fault_classes, std::size_t dims) {
  detect::PrototypeStats s;
  s.classes.assign(fault_classes + 1, {std::vector<double>(dims, 0.5), std::vector<double>(dims, 1.0)});
  return s;
}

detect::PrototypeStats class_stats(std::span<const std::vector<double>> prototypes,
                                   std::span<const std::size_t> classes,
                                   const detect::PrototypeStats& previous) {
  if (prototypes.size() != classes.size())
    throw DimensionError("class stats need one class per prototype");
  const std::size_t dims = previous.dims();
  detect::PrototypeStats out = previous;
  for (std::size_t c = 0; c < previous.classes.size(); ++c) {
    std::size_t count = 0;
    std::vector<double> mean(dims, 0.0);
    for (std::size_t i = 0; i < prototypes.size(); ++i) {
      if (classes[i] != c) continue;
      if (prototypes[i].size() != dims) throw DimensionError("prototype dimension mismatch");
      ++count;
      for (std::size_t d = 0; d < dims; ++d) mean[d] += prototypes[i][d];
    }
    if (count == 0) continue;
    for (double& v : mean) v /= static_cast<double>(count);
    std::vector<double> sigma(dims, 0.0);
    for (std::size_t i = 0; i < prototypes.size(); ++i) {
      if (classes[i] != c) continue;
      for (std::size_t d = 0; d < dims; ++d) {
        const double e = prototypes[i][d] - mean[d];
        sigma[d] += e * e;
      }
    }
    for (double& v : sigma)
      v = std::max(detect::kSigmaFloor, std::sqrt(v / static_cast<double>(count)));
    out.classes[c] = {std::move(mean), std::move(sigma)};
  }
  for (std::size_t c : classes)
    if (c >= previous.classes.size()) throw ParameterError("class index out of range");
  return out;
}

std::vector<std::size_t> assign_classes(std::span<const std::vector<double>> prototypes,
                                        std::span<const std::uint8_t> labels,
                                        const detect::PrototypeStats& stats) {
  if (prototypes.size() != labels.size())
    throw DimensionError("class assignment needs one label per prototype");
  std::vector<std::size_t> out(prototypes.size());
  for (std::size_t i = 0; i < prototypes.size(); ++i)
    out[i] = detect::classify(prototypes[i], stats, labels[i] != 0);
  return out;
}

namespace {

model::Inputs inputs_of(ad::Tape& tape, const Sample& s) {
  return {tape.constant(s.window), tape.constant(s.schedule), s.placement};
}

std::vector<double> as_vector(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

Evaluation evaluate(model::Surrogate& model, std::span<const Sample> samples) {
  Evaluation ev;
  const std::size_t m = model.config().hosts;
  for (const Sample& s : samples) {
    ad::Tape tape;
    const auto out = model.forward(tape, inputs_of(tape, s), /*train=*/false, /*param_grads=*/false);
    const Tensor& pred = out.reconstruction.value();
    const auto f = detect::fault_score(s.next, pred, m, s.task_host, s.survives);
    ev.scores.push_back(f.total);
    ev.host_scores.push_back(f.per_host);
    ev.prototypes.push_back(as_vector(out.prototype.value()));
    double lr = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double e = pred[i] - s.next[i];
      lr += s.mask[i] * e * e;
    }
    ev.reconstruction.push_back(lr);
  }
  return ev;
}

detect::PrototypeStats compute_class_stats(model::Surrogate& model,
                                           std::span<const Sample> samples,
                                           std::span<const std::size_t> classes,
                                           const detect::PrototypeStats& previous) {
  if (samples.empty()) throw ParameterError("class stats over an empty dataset");
  const Evaluation ev = evaluate(model, samples);
  return class_stats(ev.prototypes, classes, previous);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (weight_decay < 0.0) throw ParameterError("weight decay must be non-negative");
  if (fault_classes < 1) throw ParameterError("need at least one fault class");
  if (max_epochs < 1) throw ParameterError("need at least one epoch");
  if (batch_size < 1) throw ParameterError("batch size must be at least 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ParameterError("validation fraction must lie in [0,1)");
  model.validate();
  pot.validate();
}

namespace {

std::vector<std::uint8_t> truth_of(std::span<const Sample> samples) {
  std::vector<std::uint8_t> t;
  t.reserve(samples.size());
  for (const auto& s : samples) t.push_back(s.faulty ? 1 : 0);
  return t;
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TrainResult train_offline(const telemetry::Dataset& data, const TrainConfig& config,
                          const telemetry::Scaler* scaler, const EpochCallback& on_epoch) {
  config.validate();
  if (data.empty()) throw ParameterError("cannot train on an empty dataset");
  if (data.hosts() != config.model.hosts || data.features() != config.model.features ||
      data.window() != config.model.window)
    throw DimensionError("dataset (m, n, k) differs from the model configuration");

  TrainResult result;
  if (scaler) {
    result.scaler = *scaler;
  } else {
    std::vector<Tensor> windows;
    for (const auto& r : data.records()) {
      windows.push_back(r.window);
      windows.push_back(r.next_window);
    }
    result.scaler = telemetry::Scaler::fit(windows);
  }
  const std::vector<Sample> all = make_samples(data, result.scaler);
  std::size_t n_train = static_cast<std::size_t>(
      std::floor(static_cast<double>(all.size()) * (1.0 - config.validation_fraction)));
  n_train = std::clamp<std::size_t>(n_train, 1, all.size());
  const std::span<const Sample> train_set(all.data(), n_train);
  const std::span<const Sample> val_set(all.data() + n_train, all.size() - n_train);
  const auto train_truth = truth_of(train_set);

  model::Surrogate model(config.model);
  ad::Adam optimizer = ad::make_adamw(config.weight_decay);
  const std::size_t j = config.fault_classes;
  detect::PrototypeStats stats = initial_stats(j, config.model.proto);
  // Epoch 1 starts with everything in the no-anomaly class; later epochs reuse
  // the assignments made while training the previous one.
  std::vector<std::size_t> classes(n_train, 0);

  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  ad::ParamMap best_state = model.state();
  detect::PrototypeStats best_stats = stats;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const Evaluation start = evaluate(model, train_set);
    stats = class_stats(start.prototypes, classes, stats);
    // Thresholds come from a POT streamed over the epoch-start scores; each
    // record is labeled with its own in-loop score against its threshold.
    const auto pot = detect::stream_pot(start.scores, config.pot);
    const auto& labels = pot.labels;

    EpochStats es;
    es.epoch = epoch;
    const auto report = metrics::detection_metrics(labels, train_truth);
    es.detection_accuracy = report.accuracy;
    es.detection_f1 = report.f1;

    std::size_t round_robin = 0;
    double sum_lr = 0.0, sum_lt = 0.0;
    ad::ParamMap accumulated;
    std::size_t in_batch = 0;
    bool stop = false;
    for (std::size_t i = 0; i < n_train; ++i) {
      const Sample& s = train_set[i];
      ad::Tape tape;
      const auto out = model.forward(tape, inputs_of(tape, s), /*train=*/true, /*param_grads=*/true);
      const Var next = tape.constant(s.next);
      const Var mask = tape.constant(s.mask);
      const Var lr_loss = reconstruction_loss(out.reconstruction, next, mask);
      const double score = detect::fault_score(next, out.reconstruction, mask).value().item();
      const bool label = detect::fault_label(score, pot.thresholds[i]);
      std::size_t phi = 0;
      if (label) {
        phi = epoch == 1 ? 1 + (round_robin++ % j)
                         : detect::classify(out.prototype.value().data(), stats, true);
      }
      classes[i] = phi;
      if (phi != 0) ++es.labeled_faulty;
      const Var lt_loss = triplet_loss(out.prototype, phi, stats);
      const Var total = ad::add(lr_loss, lt_loss);
      const double value = total.value().item();
      if (!std::isfinite(value))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                           ", record " + std::to_string(i) + " (interval " +
                           std::to_string(data[i].interval) + ")");
      sum_lr += lr_loss.value().item();
      sum_lt += lt_loss.value().item();
      tape.backward(total);
      auto grads = model::Surrogate::gradients(tape, out);
      if (accumulated.empty()) {
        accumulated = std::move(grads);
      } else {
        for (auto& [name, g] : grads) {
          auto& acc = accumulated.at(name);
          for (std::size_t q = 0; q < g.size(); ++q) acc[q] += g[q];
        }
      }
      if (++in_batch == config.batch_size || i + 1 == n_train) {
        if (in_batch > 1)
          for (auto& [name, g] : accumulated)
            for (double& v : g.data()) v /= static_cast<double>(in_batch);
        optimizer.step(model.params(), accumulated, config.learning_rate);
        accumulated.clear();
        in_batch = 0;
        ++result.steps;
        if (config.max_steps > 0 && result.steps >= config.max_steps) {
          stop = true;
          break;
        }
      }
    }
    const double seen = static_cast<double>(std::max<std::size_t>(1, n_train));
    es.train_reconstruction = sum_lr / seen;
    es.train_triplet = sum_lt / seen;
    es.val_reconstruction = val_set.empty() ? mean_of(evaluate(model, train_set).reconstruction)
                                            : mean_of(evaluate(model, val_set).reconstruction);
    result.curve.push_back(es);
    if (on_epoch) on_epoch(es);

    if (es.val_reconstruction < best_val) {
      best_val = es.val_reconstruction;
      since_best = 0;
      best_state = model.state();
      best_stats = stats;
      result.best_epoch = epoch;
    } else if (++since_best >= config.patience) {
      break;
    }
    if (stop) break;
  }

  model.load_state(best_state);
  result.model = std::move(model);
  result.stats = best_stats;

  const Evaluation fit = evaluate(result.model, train_set);
  result.calibration = {fit.scores, fit.host_scores};
  const auto warm = detect::warm_pot(fit.scores, config.pot);
  result.threshold = warm ? warm->threshold() : std::numeric_limits<double>::infinity();
  const Evaluation every = evaluate(result.model, all);
  const auto labels = detect::stream_pot(every.scores, config.pot).labels;
  result.detection = metrics::detection_metrics(labels, truth_of(all));
  return result;
}

void write_loss_curve(const std::filesystem::path& path, std::span<const EpochStats> curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_lr,train_lt,val_lr,detection_accuracy,detection_f1,labeled_faulty\n";
  for (const auto& e : curve) {
    out << e.epoch << ',' << io::format_double(e.train_reconstruction) << ','
        << io::format_double(e.train_triplet) << ',' << io::format_double(e.val_reconstruction)
        << ',' << io::format_double(e.detection_accuracy) << ','
        << io::format_double(e.detection_f1) << ',' << e.labeled_faulty << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

void save_stats(const std::filesystem::path& path, const detect::PrototypeStats& stats) {
  io::KeyValues kv;
  kv["classes"] = std::to_string(stats.classes.size());
  kv["dims"] = std::to_string(stats.dims());
  for (std::size_t c = 0; c < stats.classes.size(); ++c) {
    kv["c" + std::to_string(c) + ".mu"] = io::join(stats.classes[c].mu, ';');
    kv["c" + std::to_string(c) + ".sigma"] = io::join(stats.classes[c].sigma, ';');
  }
  io::write_key_values(path.string(), kv);
}

detect::PrototypeStats load_stats(const std::filesystem::path& path) {
  const auto kv = io::read_key_values(path.string());
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError(path.string() + " lacks '" + key + "'");
    return it->second;
  };
  const auto classes = static_cast<std::size_t>(io::parse_int(get("classes")));
  detect::PrototypeStats stats;
  for (std::size_t c = 0; c < classes; ++c)
    stats.classes.push_back({io::parse_doubles(get("c" + std::to_string(c) + ".mu"), ';'),
                             io::parse_doubles(get("c" + std::to_string(c) + ".sigma"), ';')});
  stats.validate();
  return stats;
}

}  // namespace

void save_result(const std::filesystem::path& dir, const TrainResult& result) {
  std::filesystem::create_directories(dir);
  result.model.save(dir / "model");
  save_stats(dir / "stats", result.stats);
  result.scaler.save((dir / "scaler").string());
  std::ofstream out(dir / "calibration.csv");
  if (!out) throw IoError("cannot write calibration scores in " + dir.string());
  out << "score,host_scores\n";
  for (std::size_t i = 0; i < result.calibration.scores.size(); ++i)
    out << io::format_double(result.calibration.scores[i]) << ','
        << io::join(result.calibration.host_scores[i], ';') << '\n';
  write_loss_curve(dir / "loss.csv", result.curve);
  io::KeyValues meta;
  meta["format"] = "ftsched-model 1";
  meta["threshold"] = io::format_double(result.threshold);
  meta["best_epoch"] = std::to_string(result.best_epoch);
  meta["steps"] = std::to_string(result.steps);
  io::write_key_values((dir / "meta").string(), meta);
  if (!out) throw IoError("failed writing checkpoint in " + dir.string());
}

TrainResult load_result(const std::filesystem::path& dir) {
  const auto meta = io::read_key_values((dir / "meta").string());
  if (auto it = meta.find("format"); it == meta.end() || it->second != "ftsched-model 1")
    throw IoError("not a model checkpoint: " + dir.string());
  TrainResult r;
  r.model = model::Surrogate::load(dir / "model");
  r.stats = load_stats(dir / "stats");
  r.scaler = telemetry::Scaler::load((dir / "scaler").string());
  r.threshold = io::parse_double(meta.at("threshold"));
  r.best_epoch = static_cast<std::size_t>(io::parse_int(meta.at("best_epoch")));
  r.steps = static_cast<std::size_t>(io::parse_int(meta.at("steps")));
  std::ifstream in(dir / "calibration.csv");
  if (!in) throw IoError("missing calibration scores in " + dir.string());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    if (f.size() != 2) throw IoError("corrupted calibration row in " + dir.string());
    r.calibration.scores.push_back(io::parse_double(f[0]));
    r.calibration.host_scores.push_back(io::parse_doubles(f[1], ';'));
  }
  return r;
}

}  // namespace ftsched::train
