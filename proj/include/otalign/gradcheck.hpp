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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace otalign {

// Central finite-difference checks of every hand-written backward pass.
struct GradcheckRow {
  std::string module;
  std::string op;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t probes = 0;  // coordinates compared
  bool passed = false;
};

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::optional<std::string> module;  // run only this module's suites
  // Test hook: scale every analytic gradient by 1.1 before comparing, which
  // every suite must detect.
  bool corrupt = false;
};

// Module names accepted by GradcheckOptions::module.
const std::vector<std::string>& gradcheck_modules();

// Relative error of one coordinate: |a - n| / max(|a|, |n|, floor), where
// floor is 1e-3 of the largest finite-difference magnitude in the op, so
// near-zero coordinates are judged on the op's scale.
std::vector<GradcheckRow> run_gradchecks(const GradcheckOptions& options);

}  // namespace otalign
