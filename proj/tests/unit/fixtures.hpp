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

#include "ftsched/telemetry/dataset.hpp"
#include "ftsched/train/train.hpp"

namespace ftsched::test {

// 60 records of a random-policy episode at lambda 2 (seed 3).
const telemetry::Dataset& small_dataset();

// Default-sized surrogate trained for a few dozen steps on small_dataset().
// Built once per process; callers copy it.
const train::TrainResult& small_bundle();

}  // namespace ftsched::test
