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

#include <span>
#include <vector>

namespace otalign {

// log(sum(exp(v))) via max-shift. Throws ContractError on empty input.
// Returns -inf when every entry is -inf.
double logsumexp(std::span<const double> v);

// Exp-normalize with max-shift; output sums to one.
std::vector<double> softmax(std::span<const double> v);
std::vector<double> log_softmax(std::span<const double> v);

// Index of the largest entry, ties broken toward the lowest index.
std::size_t argmax(std::span<const double> v);

// log(1 + exp(x)) without overflow.
double softplus(double x);
double sigmoid(double x);

}  // namespace otalign
