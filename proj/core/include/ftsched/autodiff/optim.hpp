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
#include <map>
#include <string>

#include "ftsched/autodiff/tensor.hpp"

namespace ftsched::ad {

// Named parameters; std::map keeps iteration order stable across runs.
using ParamMap = std::map<std::string, Tensor>;

// Adam with optional decoupled weight decay (AdamW when weight_decay > 0).
// Kingma & Ba bias correction; decay is applied as p -= lr * wd * p before
// the moment update, not folded into the gradient.
class Adam {
 public:
  struct Config {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  Adam() = default;
  explicit Adam(Config config) : config_(config) {}

  // Updates every entry of `params` that has a matching gradient. Gradients
  // without a parameter are ignored.
  void step(ParamMap& params, const ParamMap& grads, double lr);

  // Single-tensor variant keyed by `name`.
  void step(const std::string& name, Tensor& param, const Tensor& grad,
            double lr);

  std::size_t steps(const std::string& name) const;
  void reset() { state_.clear(); }
  const Config& config() const noexcept { return config_; }

 private:
  struct Moments {
    Tensor m, v;
    std::size_t t = 0;
  };

  Config config_;
  std::map<std::string, Moments> state_;
};

inline Adam make_adamw(double weight_decay) {
  Adam::Config c;
  c.weight_decay = weight_decay;
  return Adam(c);
}

// SGDR schedule: cosine decay from max_lr to min_lr over `period` steps,
// restarting at max_lr; each cycle is `period_mult` times longer than the
// previous one.
class CosineWarmRestarts {
 public:
  CosineWarmRestarts(double max_lr, double min_lr, std::size_t period,
                     double period_mult = 1.0);

  double lr(std::size_t step) const;

  // True when `step` opens a new cycle (step 0 included).
  bool is_restart(std::size_t step) const;

 private:
  // Position of `step` inside its cycle and that cycle's length.
  std::pair<double, double> locate(std::size_t step) const;

  double max_lr_;
  double min_lr_;
  std::size_t period_;
  double mult_;
};

}  // namespace ftsched::ad
