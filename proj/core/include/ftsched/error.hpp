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

#include <stdexcept>
#include <string>

namespace ftsched {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible shapes or row counts.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A configuration or call parameter outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Operation called on an object that is not ready for it.
class StateError : public Error {
 public:
  using Error::Error;
};

// Missing, unreadable or corrupted files.
class IoError : public Error {
 public:
  using Error::Error;
};

// A loss or score turned non-finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ftsched
