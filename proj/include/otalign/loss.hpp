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

#include "otalign/matrix.hpp"

namespace otalign {

// Scalar loss between two feature sequences with gradients shaped like the
// inputs (d x m and d x n).
struct LossResult {
  double value = 0.0;
  Matrix grad_u;
  Matrix grad_v;
};

}  // namespace otalign
