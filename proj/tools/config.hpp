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

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ftsched/harness/experiment.hpp"
#include "ftsched/train/train.hpp"

namespace ftsched::cli {

inline constexpr const char* kEnvPrefix = "FTSCHED_";

struct Config {
  harness::ExperimentConfig experiment;
  train::TrainConfig train;
  std::vector<double> lambdas{1.0, 5.0, 10.0, 15.0};  // sweep
  std::filesystem::path dataset;
};

// One settable key. Keys are the dotted field paths of Config
// ("lambda", "sim.burst_probability", "train.max_epochs", ...).
struct Field {
  std::string key;
  std::string help;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

const std::vector<Field>& fields();

// FTSCHED_ plus the key upper-cased with '.' mapped to '_'.
std::string env_name(const std::string& key);

// Throws ParameterError on unknown keys or unparsable values.
void apply(Config& config, const std::string& key, const std::string& value);
void apply_file(Config& config, const std::filesystem::path& path);
void apply_env(Config& config);

// The model dimensions follow the experiment's m and k.
void sync(Config& config);

void write_config(const std::filesystem::path& path, const Config& config);

}  // namespace ftsched::cli
