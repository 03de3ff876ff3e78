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

#include "ftsched/autodiff/optim.hpp"

#include <cmath>
#include <numbers>

#include "ftsched/error.hpp"

namespace ftsched::ad {

void Adam::step(ParamMap& params, const ParamMap& grads, double lr) {
  for (auto& [name, param] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    step(name, param, it->second, lr);
  }
}

void Adam::step(const std::string& name, Tensor& param, const Tensor& grad,
                double lr) {
  if (param.shape() != grad.shape()) {
    throw DimensionError("Adam: gradient for '" + name + "' has shape " +
                         shape_str(grad.shape()) + ", parameter has " +
                         shape_str(param.shape()));
  }
  Moments& s = state_[name];
  if (s.t == 0) {
    s.m = Tensor(param.shape());
    s.v = Tensor(param.shape());
  }
  ++s.t;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    if (config_.weight_decay > 0.0) param[i] -= lr * config_.weight_decay * param[i];
    const double g = grad[i];
    s.m[i] = b1 * s.m[i] + (1.0 - b1) * g;
    s.v[i] = b2 * s.v[i] + (1.0 - b2) * g * g;
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
  }
}

std::size_t Adam::steps(const std::string& name) const {
  auto it = state_.find(name);
  return it == state_.end() ? 0 : it->second.t;
}

CosineWarmRestarts::CosineWarmRestarts(double max_lr, double min_lr,
                                       std::size_t period, double period_mult)
    : max_lr_(max_lr), min_lr_(min_lr), period_(period), mult_(period_mult) {
  if (period_ == 0) throw ParameterError("cosine annealing period must be >= 1");
  if (mult_ < 1.0) throw ParameterError("cosine period multiplier must be >= 1");
  if (min_lr_ > max_lr_) throw ParameterError("cosine min_lr exceeds max_lr");
}

std::pair<double, double> CosineWarmRestarts::locate(std::size_t step) const {
  double len = static_cast<double>(period_);
  double pos = static_cast<double>(step);
  while (pos >= len) {
    pos -= len;
    len *= mult_;
  }
  return {pos, len};
}

double CosineWarmRestarts::lr(std::size_t step) const {
  const auto [pos, len] = locate(step);
  return min_lr_ +
         0.5 * (max_lr_ - min_lr_) * (1.0 + std::cos(std::numbers::pi * pos / len));
}

bool CosineWarmRestarts::is_restart(std::size_t step) const {
  return locate(step).first == 0.0;
}

}  // namespace ftsched::ad
