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

// ftsched: dataset generation, offline training, evaluation and closed-loop
// runs on the simulated edge cluster.
//
// Settings come from, in increasing precedence: built-in defaults, the
// -c/--config file (flat key=value), FTSCHED_* environment variables and
// --<key> flags. `ftsched --help` lists every key.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <json.hpp>

#include "config.hpp"
#include "ftsched/error.hpp"
#include "ftsched/harness/experiment.hpp"
#include "ftsched/io/text.hpp"
#include "ftsched/rng.hpp"
#include "ftsched/sched/policies.hpp"
#include "ftsched/sim/episode.hpp"
#include "ftsched/telemetry/dataset.hpp"
#include "ftsched/train/train.hpp"

namespace fs = std::filesystem;
using namespace ftsched;

namespace {

fs::path require_path(const fs::path& p, const char* key) {
  if (p.empty()) throw ParameterError(std::string("--") + key + " is required");
  return p;
}

std::unique_ptr<sim::Policy> make_policy(const cli::Config& c, std::uint64_t seed) {
  const auto& e = c.experiment;
  if (e.policy == "random")
    return std::make_unique<sched::RandomPolicy>(derive_seed(seed, hash_label("random")));
  if (e.policy == "reactive_threshold") return std::make_unique<sched::ReactivePolicy>();
  if (e.policy == "gobi_ref") return std::make_unique<sched::GobiPolicy>(e.alpha, e.beta);
  if (e.policy == "deepft") {
    sched::DeepFtConfig dc;
    dc.opt = e.opt;
    dc.tune = e.tune;
    dc.fine_tune = e.fine_tune;
    dc.pot = e.pot;
    dc.seed = derive_seed(seed, hash_label("deepft"));
    return std::make_unique<sched::DeepFtPolicy>(
        train::load_result(require_path(e.checkpoint, "checkpoint")), dc);
  }
  throw ParameterError("unknown policy '" + e.policy + "'");
}

int gen_dataset(const cli::Config& c) {
  const fs::path out = require_path(c.experiment.output, "output");
  const std::uint64_t seed = c.experiment.seeds.front();
  const auto ep = c.experiment.episode(seed);
  auto policy = make_policy(c, seed);
  std::fprintf(stderr, "episode: policy=%s lambda=%g T=%d seed=%llu\n", c.experiment.policy.c_str(),
               ep.lambda, ep.intervals, static_cast<unsigned long long>(seed));
  const auto log = sim::run_episode(ep, *policy);
  const auto data = telemetry::dataset_from_episode(log, c.experiment.window);

  std::vector<ad::Tensor> windows;
  for (const auto& r : data.records()) {
    windows.push_back(r.window);
    windows.push_back(r.next_window);
  }
  const auto scaler = telemetry::Scaler::fit(windows);
  telemetry::save_dataset(out, data, &scaler);
  sim::write_trace(out / "trace", log);

  std::size_t faulty = 0;
  for (const auto& r : data.records()) faulty += r.faulty();
  std::printf("records %zu faulty %zu -> %s\n", data.size(), faulty, out.string().c_str());
  return 0;
}

int train_cmd(cli::Config c) {
  const fs::path out = require_path(c.experiment.output, "output");
  const fs::path dir = require_path(c.dataset, "dataset");
  const auto data = telemetry::load_dataset(dir);
  c.train.model.hosts = data.hosts();
  c.train.model.window = data.window();

  std::optional<telemetry::Scaler> scaler;
  if (fs::exists(dir / "scaler")) scaler = telemetry::Scaler::load((dir / "scaler").string());

  const auto result = train::train_offline(
      data, c.train, scaler ? &*scaler : nullptr, [](const train::EpochStats& e) {
        std::fprintf(stderr, "epoch %3zu  L_R %.4f  L_T %.4f  val %.4f  F1 %.3f\n", e.epoch,
                     e.train_reconstruction, e.train_triplet, e.val_reconstruction, e.detection_f1);
      });
  train::save_result(out, result);
  train::write_loss_curve(out / "loss.csv", result.curve);
  cli::write_config(out / "config", c);
  const auto& d = result.detection;
  std::printf("best epoch %zu  params %zu  threshold %s\n", result.best_epoch,
              result.model.parameter_count(), io::format_double(result.threshold).c_str());
  std::printf("detection  precision %.4f  recall %.4f  f1 %.4f\n", d.precision, d.recall, d.f1);
  return 0;
}

int evaluate_cmd(const cli::Config& c) {
  const auto data = telemetry::load_dataset(require_path(c.dataset, "dataset"));
  auto bundle = train::load_result(require_path(c.experiment.checkpoint, "checkpoint"));
  const auto ev = harness::evaluate_detection(bundle.model, bundle.calibration, bundle.scaler, data,
                                              c.experiment.pot);
  const auto& d = ev.detection;
  nlohmann::ordered_json j;
  j["records"] = data.size();
  j["tp"] = d.tp;
  j["fp"] = d.fp;
  j["tn"] = d.tn;
  j["fn"] = d.fn;
  j["accuracy"] = d.accuracy;
  j["precision"] = d.precision;
  j["recall"] = d.recall;
  j["f1"] = d.f1;
  j["hit_rate"] = ev.diagnosis.hit_rate;
  j["ndcg"] = ev.diagnosis.ndcg;
  j["diagnosed_intervals"] = ev.diagnosis.intervals;
  std::cout << j.dump(2) << '\n';
  if (!c.experiment.output.empty()) {
    fs::create_directories(c.experiment.output);
    std::ofstream(c.experiment.output / "evaluation.json") << j.dump(2) << '\n';
    std::ofstream scores(c.experiment.output / "scores.csv");
    scores << "record,score,threshold,label\n";
    for (std::size_t i = 0; i < ev.scores.size(); ++i)
      scores << i << ',' << io::format_double(ev.scores[i]) << ','
             << io::format_double(ev.thresholds[i]) << ',' << int(ev.labels[i]) << '\n';
  }
  return 0;
}

void print_summary(const harness::ExperimentResult& r) {
  static const char* kShown[] = {"qos_mean",   "energy_per_task",   "art",
                                 "slo_fraction", "improvement_ratio", "f1",
                                 "migrations", "descent_fraction"};
  std::printf("%s lambda=%g seeds=%zu overhead_ratio=%.3f\n", r.policy.c_str(), r.lambda,
              r.seeds.size(), r.overhead_ratio);
  for (const char* name : kShown)
    std::printf("  %-18s %.6g +- %.3g\n", name, harness::metric(r.mean, name),
                harness::metric(r.stddev, name));
}

int run_cmd(const cli::Config& c) {
  const auto r = harness::run_experiment(c.experiment);
  if (!c.experiment.output.empty()) cli::write_config(c.experiment.output / "config", c);
  print_summary(r);
  return 0;
}

int sweep_cmd(const cli::Config& c) {
  const auto results = harness::sweep_lambda(c.experiment, c.lambdas);
  if (!c.experiment.output.empty()) cli::write_config(c.experiment.output / "config", c);
  for (const auto& r : results) print_summary(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault-aware scheduling on a simulated edge cluster"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> sets;
  app.add_option("-c,--config", config_file, "key=value settings file")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "key=value override, repeatable");
  std::map<std::string, std::string> flags;
  for (const auto& f : cli::fields())
    app.add_option("--" + f.key, flags[f.key], f.help + " [env " + cli::env_name(f.key) + "]")
        ->group("Settings");

  auto* gen = app.add_subcommand("gen-dataset", "simulate an episode and save its dataset");
  auto* tr = app.add_subcommand("train", "train the surrogate offline on a dataset");
  auto* ev = app.add_subcommand("evaluate", "detection and diagnosis of a checkpoint on a dataset");
  auto* run = app.add_subcommand("run", "closed-loop episodes with one policy");
  auto* sweep = app.add_subcommand("sweep", "run over several arrival rates");

  CLI11_PARSE(app, argc, argv);

  cli::Config c;
  // Dataset generation defaults to a random-policy stream of 500 intervals.
  if (gen->parsed()) {
    c.experiment.policy = "random";
    c.experiment.lambda = 3.0;
    c.experiment.intervals = 500;
  }
  try {
    if (!config_file.empty()) cli::apply_file(c, config_file);
    cli::apply_env(c);
    for (const auto& f : cli::fields())
      if (app.count("--" + f.key)) cli::apply(c, f.key, flags[f.key]);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ParameterError("--set expects key=value, got '" + s + "'");
      cli::apply(c, s.substr(0, eq), s.substr(eq + 1));
    }
    cli::sync(c);

    if (gen->parsed()) return gen_dataset(c);
    if (tr->parsed()) return train_cmd(c);
    if (ev->parsed()) return evaluate_cmd(c);
    if (run->parsed()) return run_cmd(c);
    if (sweep->parsed()) return sweep_cmd(c);
  } catch (const ftsched::Error& e) {
    std::fprintf(stderr, "ftsched: %s\n", e.what());
    return 1;
  }
  return 0;
}
