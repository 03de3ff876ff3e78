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

#include "ftsched/autodiff/optim.hpp"

namespace ftsched::ad {

// Writes `<stem>.bin` (named tensors: name, shape, raw little-endian
// float64 data) and `<stem>.idx` (one text line per tensor: name, rank,
// dims, byte offset of its data).
void save_tensors(const std::filesystem::path& stem, const ParamMap& tensors);

// Reads a file pair written by save_tensors. Throws IoError when either file
// is missing, truncated, or the two disagree.
ParamMap load_tensors(const std::filesystem::path& stem);

}  // namespace ftsched::ad
