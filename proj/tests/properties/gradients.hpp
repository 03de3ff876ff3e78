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

#include <string>
#include <vector>

#include "ftsched/autodiff/gradcheck.hpp"

// Finite-difference checks of every autodiff primitive and of the full
// surrogate pass on a tiny instance (m=2, p=2, n=3, k=2).
namespace ftsched::properties {

struct GradCase {
  std::string name;
  ad::GradCheckReport report;
};

inline constexpr double kGradEps = 1e-5;
inline constexpr double kGradTol = 1e-4;

std::vector<GradCase> primitive_gradients();
std::vector<GradCase> surrogate_gradients();

}  // namespace ftsched::properties
