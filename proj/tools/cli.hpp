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

#include <iosfwd>
#include <string>
#include <vector>

#include "otalign/siamese.hpp"

namespace otalign::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kInputError = 2,
  kDiverged = 3,
  kIncompatible = 4,
};

// Runs one command line (without the program name) in-process.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Line chart of ctc_loss, aux_loss and total against record index.
std::string render_svg(const std::vector<StepMetrics>& metrics);

}  // namespace otalign::cli
