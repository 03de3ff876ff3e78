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

#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "ftsched/error.hpp"
#include "ftsched/io/text.hpp"

namespace ftsched::cli {

namespace {

double to_double(const std::string& s) { return io::parse_double(s); }

std::size_t to_size(const std::string& s) {
  const long long v = io::parse_int(s);
  if (v < 0) throw ParameterError("expected a non-negative integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  throw ParameterError("expected a boolean, got '" + s + "'");
}

std::string text(double v) { return io::format_double(v); }
std::string text(std::size_t v) { return std::to_string(v); }
std::string text(int v) { return std::to_string(v); }
std::string text(bool v) { return v ? "true" : "false"; }
std::string text(const std::string& v) { return v; }
std::string text(const std::filesystem::path& v) { return v.string(); }

template <class T>
T parse(const std::string& s) {
  if constexpr (std::is_same_v<T, double>) {
    return to_double(s);
  } else if constexpr (std::is_same_v<T, bool>) {
    return to_bool(s);
  } else if constexpr (std::is_same_v<T, int>) {
    return static_cast<int>(io::parse_int(s));
  } else if constexpr (std::is_integral_v<T>) {
    return static_cast<T>(to_size(s));
  } else {
    return T(s);
  }
}

template <class T>
Field scalar(std::string key, std::string help, T& (*ref)(Config&)) {
  return {std::move(key), std::move(help),
          [ref](Config& c, const std::string& v) { ref(c) = parse<T>(v); },
          [ref](const Config& c) { return text(ref(const_cast<Config&>(c))); }};
}

#define FT_FIELD(key, help, expr) \
  scalar(key, help, +[](Config& c) -> auto& { return expr; })

std::vector<Field> make_fields() {
  std::vector<Field> f = {
      FT_FIELD("hosts", "number of hosts m", c.experiment.hosts),
      FT_FIELD("window", "telemetry window k", c.experiment.window),
      FT_FIELD("intervals", "scheduling intervals T", c.experiment.intervals),
      FT_FIELD("lambda", "Poisson arrival rate per interval", c.experiment.lambda),
      FT_FIELD("alpha", "QoS weight on response time", c.experiment.alpha),
      FT_FIELD("beta", "QoS weight on energy", c.experiment.beta),
      FT_FIELD("policy", "random | reactive_threshold | gobi_ref | deepft", c.experiment.policy),
      FT_FIELD("calibrate_slo", "derive deadlines from a gobi_ref calibration run",
               c.experiment.calibrate_slo),
      FT_FIELD("fine_tune", "online fine-tuning of the DeepFT model", c.experiment.fine_tune),
      FT_FIELD("checkpoint", "trained model directory", c.experiment.checkpoint),
      FT_FIELD("output", "output directory", c.experiment.output),
      FT_FIELD("parallel", "run seeds on separate threads", c.experiment.parallel),
      FT_FIELD("dataset", "dataset directory", c.dataset),

      FT_FIELD("sim.interval_seconds", "interval length (s)", c.experiment.sim.interval_seconds),
      FT_FIELD("sim.demand_noise", "log-normal CV of realized demand", c.experiment.sim.demand_noise),
      FT_FIELD("sim.burst_probability", "per task and interval", c.experiment.sim.burst_probability),
      FT_FIELD("sim.burst_factor", "burst multiplier on one resource", c.experiment.sim.burst_factor),
      FT_FIELD("sim.migration_downtime", "fraction of an interval lost per migration",
               c.experiment.sim.migration_downtime),
      FT_FIELD("sim.admission_cap", "nominal utilization a placement may reach",
               c.experiment.sim.admission_cap),
      FT_FIELD("sim.label_window", "ground-truth rolling window", c.experiment.sim.label_window),
      FT_FIELD("sim.label_kappa", "ground-truth std multiplier", c.experiment.sim.label_kappa),
      FT_FIELD("sim.label_cap", "ground-truth static utilization floor", c.experiment.sim.label_cap),
      FT_FIELD("sim.art_max", "initial response-time normalization (s)", c.experiment.sim.art_max),
      FT_FIELD("sim.art_warmup", "intervals the normalization may grow", c.experiment.sim.art_warmup),

      FT_FIELD("opt.iterations", "descent iterations per interval", c.experiment.opt.iterations),
      FT_FIELD("opt.learning_rate", "step size on the decision logits", c.experiment.opt.learning_rate),
      FT_FIELD("opt.min_learning_rate", "cosine floor", c.experiment.opt.min_learning_rate),
      FT_FIELD("opt.period", "cosine cycle length", c.experiment.opt.period),
      FT_FIELD("opt.period_mult", "cycle growth factor", c.experiment.opt.period_mult),
      FT_FIELD("opt.temperature", "row softmax temperature", c.experiment.opt.temperature),
      FT_FIELD("opt.init_logit", "logit of the warm-start entry", c.experiment.opt.init_logit),

      FT_FIELD("tune.learning_rate", "online fine-tuning step size", c.experiment.tune.learning_rate),
      FT_FIELD("tune.weight_decay", "online fine-tuning weight decay", c.experiment.tune.weight_decay),
      FT_FIELD("tune.stats_decay", "EMA decay of the class statistics", c.experiment.tune.stats_decay),

      FT_FIELD("pot.q", "POT risk level", c.experiment.pot.q),
      FT_FIELD("pot.n_init", "POT calibration scores", c.experiment.pot.n_init),
      FT_FIELD("pot.init_level", "POT initial empirical quantile", c.experiment.pot.init_level),

      FT_FIELD("train.learning_rate", "AdamW step size", c.train.learning_rate),
      FT_FIELD("train.weight_decay", "AdamW weight decay", c.train.weight_decay),
      FT_FIELD("train.fault_classes", "fault classes j", c.train.fault_classes),
      FT_FIELD("train.max_epochs", "epoch limit", c.train.max_epochs),
      FT_FIELD("train.max_steps", "optimizer step limit, 0 for none", c.train.max_steps),
      FT_FIELD("train.patience", "early-stopping patience", c.train.patience),
      FT_FIELD("train.batch_size", "records per optimizer step", c.train.batch_size),
      FT_FIELD("train.validation_fraction", "held-out tail of the dataset",
               c.train.validation_fraction),

      FT_FIELD("model.hidden", "embedding width d", c.train.model.hidden),
      FT_FIELD("model.heads", "attention heads", c.train.model.heads),
      FT_FIELD("model.proto", "prototype width d_p", c.train.model.proto),
      FT_FIELD("model.rounds", "message-passing rounds", c.train.model.rounds),
      FT_FIELD("model.seed", "parameter initialization seed", c.train.model.seed),
  };

  f.push_back({"seeds", "comma-separated episode seeds",
               [](Config& c, const std::string& v) {
                 c.experiment.seeds.clear();
                 for (int s : io::parse_ints(v, ',')) {
                   if (s < 0) throw ParameterError("seeds must be non-negative");
                   c.experiment.seeds.push_back(static_cast<std::uint64_t>(s));
                 }
               },
               [](const Config& c) {
                 std::string out;
                 for (std::size_t i = 0; i < c.experiment.seeds.size(); ++i)
                   out += (i ? "," : "") + std::to_string(c.experiment.seeds[i]);
                 return out;
               }});
  f.push_back({"lambdas", "comma-separated arrival rates for sweep",
               [](Config& c, const std::string& v) { c.lambdas = io::parse_doubles(v, ','); },
               [](const Config& c) { return io::join(c.lambdas, ','); }});
  return f;
}

#undef FT_FIELD

}  // namespace

const std::vector<Field>& fields() {
  static const std::vector<Field> all = make_fields();
  return all;
}

std::string env_name(const std::string& key) {
  std::string out = kEnvPrefix;
  for (char ch : key)
    out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

void apply(Config& config, const std::string& key, const std::string& value) {
  const auto& all = fields();
  auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) { return f.key == key; });
  if (it == all.end()) throw ParameterError("unknown config key '" + key + "'");
  try {
    it->set(config, value);
  } catch (const Error& e) {
    throw ParameterError(key + ": " + e.what());
  }
}

void apply_file(Config& config, const std::filesystem::path& path) {
  for (const auto& [key, value] : io::read_key_values(path.string())) apply(config, key, value);
}

void apply_env(Config& config) {
  for (const auto& f : fields())
    if (const char* v = std::getenv(env_name(f.key).c_str())) apply(config, f.key, v);
}

void sync(Config& config) {
  config.experiment.sim.hosts = config.experiment.hosts;
  config.train.model.hosts = config.experiment.hosts;
  config.train.model.window = config.experiment.window;
  config.train.pot = config.experiment.pot;
}

void write_config(const std::filesystem::path& path, const Config& config) {
  io::KeyValues kv;
  for (const auto& f : fields()) kv[f.key] = f.get(config);
  io::write_key_values(path.string(), kv);
}

}  // namespace ftsched::cli
