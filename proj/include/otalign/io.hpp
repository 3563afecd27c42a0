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

#include <filesystem>
#include <string>
#include <vector>

#include "otalign/encoder.hpp"
#include "otalign/matrix.hpp"
#include "otalign/siamese.hpp"
#include "otalign/synth.hpp"

// File formats. Every parser throws InputError with a message naming the
// offending key or position.
namespace otalign {

// Everything a command needs, one JSON object per section:
//   {"synth": {...}, "train": {...}, "ot": {...}, "model": {...}}
// Missing keys keep their defaults; unknown keys are rejected.
struct RunConfig {
  SynthConfig synth;
  TrainConfig train;
};

RunConfig parse_run_config(const std::string& text);
// Every key with its resolved value. Parsing the result gives back `cfg`.
std::string run_config_to_json(const RunConfig& cfg);

// Dataset: a JSON array of {"frames": [[f floats] x m], "transcript": [...],
// "segments": [[start, end], ...]}. Frames are stored one time step per
// inner array. Floats use 17 significant digits, so reading back is exact.
std::string dataset_to_json(const Dataset& data);
Dataset parse_dataset(const std::string& text);

struct Checkpoint {
  Model model;
  RunConfig config;  // the resolved config the model was trained with
};

std::string checkpoint_to_json(const Model& model, const RunConfig& config);
Checkpoint parse_checkpoint(const std::string& text);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// One JSONL line (no trailing newline) with keys step, epoch, ctc_loss,
// aux_loss, total, lr, grad_norm. Epoch summaries carry "step": null.
std::string metrics_line(const StepMetrics& m);
std::vector<StepMetrics> parse_metrics(const std::string& text);

// A point sequence as a JSON array of equal-length number arrays; returns
// the d x L matrix with one point per column.
Matrix parse_points(const std::string& text);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace otalign
