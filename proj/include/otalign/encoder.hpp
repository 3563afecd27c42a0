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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otalign/matrix.hpp"
#include "otalign/random.hpp"

namespace otalign {

struct EncoderDims {
  std::size_t vocab = 20;         // real tokens; logits have vocab + 1 rows (blank = 0)
  std::size_t frame_dim = 16;
  std::size_t hidden = 32;
  std::size_t speech_layers = 4;
  std::size_t text_layers = 2;
  bool share_last_layers = false;  // text hidden layers alias the last speech ones

  void validate() const;
};

// Named tensors. Encoders refer to tensors by index, so a shared layer is a
// single entry referenced from both branches and its gradient buffer sums
// both contributions.
class ParamStore {
 public:
  std::size_t add(std::string name, Matrix value);
  std::size_t size() const { return values_.size(); }
  Matrix& value(std::size_t index) { return values_.at(index); }
  const Matrix& value(std::size_t index) const { return values_.at(index); }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  std::optional<std::size_t> find(const std::string& name) const;

  // Zero buffers matching every tensor's shape.
  std::vector<Matrix> zeros_like() const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

using Gradients = std::vector<Matrix>;  // parallel to ParamStore

struct Affine {
  std::size_t weight = 0;  // out x in
  std::size_t bias = 0;    // out x 1
};

struct SpeechEncoderParams {
  Affine input;                // frame_dim -> hidden
  std::vector<Affine> layers;  // hidden -> hidden, after subsampling
  Affine output;               // hidden -> vocab + 1 (CTC logits)
};

struct TextEncoderParams {
  std::size_t embedding = 0;   // (vocab + 1) x hidden
  std::vector<Affine> layers;  // hidden -> hidden
};

struct Model {
  EncoderDims dims;
  ParamStore store;
  SpeechEncoderParams speech;
  TextEncoderParams text;

  // Indices of tensors reachable from the text branch (embedding + layers).
  std::vector<std::size_t> text_tensors() const;
};

// Fan-in scaled uniform weights, zero biases. Deterministic in the seed.
Model init_params(Seed seed, const EncoderDims& dims);

// Length after two ceil-halving stages: ceil(ceil(m / 2) / 2).
std::size_t subsampled_length(std::size_t frames);

struct SpeechCache {
  Matrix frames;                 // f x m
  Matrix input_pre;              // hidden x m
  Matrix input_post;             // relu(input_pre)
  Matrix half;                   // hidden x ceil(m/2)
  Matrix quarter;                // hidden x ceil(ceil(m/2)/2)
  std::vector<Matrix> layer_pre;
  std::vector<Matrix> layer_post;
};

struct SpeechOutput {
  Matrix features;  // hidden x S
  Matrix logits;    // S x (vocab + 1), one row per output frame
  SpeechCache cache;
};

struct TextCache {
  std::vector<int> tokens;
  Matrix embedded;  // hidden x n
  std::vector<Matrix> layer_pre;
  std::vector<Matrix> layer_post;
};

struct TextOutput {
  Matrix features;  // hidden x n
  TextCache cache;
};

SpeechOutput speech_forward(const Model& model, const Matrix& frames);
TextOutput text_forward(const Model& model, std::span<const int> tokens);

// Reverse-mode pass for the speech branch. Accumulates into `grads` and
// returns d loss / d frames. Either upstream gradient may be empty (treated
// as zero).
Matrix speech_backward(const Model& model, const SpeechCache& cache, const Matrix& grad_features,
                       const Matrix& grad_logits, Gradients& grads);

// Reverse-mode pass for the text branch; accumulates into `grads`.
void text_backward(const Model& model, const TextCache& cache, const Matrix& grad_features,
                   Gradients& grads);

}  // namespace otalign
