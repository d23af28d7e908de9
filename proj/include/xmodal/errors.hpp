// Copyright 2026 The xmodal Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XMODAL_ERRORS_HPP_
#define XMODAL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace xmodal {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced or consumed by a numeric operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Tensor extents that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed user input (corpus, caption, geometry).
class InputError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Persisted file could not be read back (bad magic, version, truncated table).
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace xmodal

#endif  // XMODAL_ERRORS_HPP_
