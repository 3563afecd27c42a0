// Copyright 2026 The otalign Authors.
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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace otalign {

// Every failure raised by the library derives from Error so callers can map
// categories onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was not met (empty input, shape mismatch, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A CTC target cannot be produced by any alignment of the given frames.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// An oracle refused an instance that exceeds its combinatorial budget.
class LimitError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Checkpoint, dataset and config disagree on shapes or vocabulary.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

// Malformed or unknown input (files, config keys).
class InputError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& message) {
  if (!cond) throw ContractError(message);
}

}  // namespace otalign
