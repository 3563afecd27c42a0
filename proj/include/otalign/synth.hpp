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
#include <cstdint>
#include <vector>

#include "otalign/ctc.hpp"
#include "otalign/matrix.hpp"

namespace otalign {

struct SynthConfig {
  std::size_t vocab = 20;  // real tokens 1..vocab
  std::size_t frame_dim = 16;
  std::size_t repeat_min = 8;  // frames per token, inclusive range
  std::size_t repeat_max = 12;
  double noise_sigma = 0.3;
  std::size_t transcript_len_min = 3;
  std::size_t transcript_len_max = 12;
  std::size_t n_samples = 500;
  std::uint64_t seed = 1;
  // Redraw samples whose 4x-subsampled length cannot emit the transcript.
  bool ensure_ctc_feasible = true;
  // Allow a token to follow itself. Two identical neighbours produce one
  // unbroken run of frames, which a frame-local encoder cannot split.
  bool adjacent_repeats = false;

  void validate() const;
};

// Frames [start, end) of the token a segment belongs to.
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Sample {
  Matrix frames;             // frame_dim x m
  TokenSequence transcript;  // blank-free
  std::vector<Segment> segments;  // one per transcript token, in order, covering 0..m
};

using Dataset = std::vector<Sample>;

// Unit-norm token prototypes, frame_dim x vocab (column k - 1 is token k).
// Redrawn until every pair is further apart than 4 * noise_sigma / sqrt(f).
Matrix synth_prototypes(const SynthConfig& cfg);

// Each transcript token's prototype repeated r ~ U{repeat_min..repeat_max}
// times plus N(0, noise_sigma^2) noise. Deterministic in cfg.seed.
Dataset generate(const SynthConfig& cfg);

// Largest token id in the data; the model vocabulary used by train().
std::size_t infer_vocab(const Dataset& data);

// Fraction of plan mass on (output frame, token) pairs whose frame ranges
// overlap: output frame i covers original frames [f*i, f*i + f).
double diagonal_mass(const Matrix& plan, const Sample& sample, std::size_t subsample_factor = 4);

}  // namespace otalign
