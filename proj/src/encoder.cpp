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

#include "otalign/encoder.hpp"

#include <algorithm>
#include <string>

#include "otalign/errors.hpp"

namespace otalign {

namespace {

Matrix affine_forward(const ParamStore& store, const Affine& layer, const Matrix& in) {
  const Matrix& b = store.value(layer.bias);
  Matrix out = matmul(store.value(layer.weight), in);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (double& x : row) x += b(r, 0);
  }
  return out;
}

// Accumulates weight/bias gradients and returns d loss / d input.
Matrix affine_backward(const ParamStore& store, const Affine& layer, const Matrix& in,
                       const Matrix& grad_out, Gradients& grads) {
  grads[layer.weight] += matmul_nt(grad_out, in);
  Matrix& gb = grads[layer.bias];
  for (std::size_t r = 0; r < grad_out.rows(); ++r)
    for (double x : grad_out.row(r)) gb(r, 0) += x;
  return matmul_tn(store.value(layer.weight), grad_out);
}

Matrix relu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = std::max(v, 0.0);
  return out;
}

Matrix relu_backward(const Matrix& pre, const Matrix& grad_post) {
  Matrix out = grad_post;
  for (std::size_t k = 0; k < out.size(); ++k)
    if (!(pre.data()[k] > 0.0)) out.data()[k] = 0.0;
  return out;
}

// Averages column pairs (0,1), (2,3), ...; an odd trailing column is copied.
Matrix pair_average(const Matrix& x) {
  const std::size_t out_len = (x.cols() + 1) / 2;
  Matrix out(x.rows(), out_len);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < out_len; ++c) {
      const std::size_t a = 2 * c;
      out(r, c) = a + 1 < x.cols() ? 0.5 * (x(r, a) + x(r, a + 1)) : x(r, a);
    }
  }
  return out;
}

Matrix pair_average_backward(std::size_t in_len, const Matrix& grad_out) {
  Matrix g(grad_out.rows(), in_len);
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    for (std::size_t c = 0; c < grad_out.cols(); ++c) {
      const std::size_t a = 2 * c;
      if (a + 1 < in_len) {
        g(r, a) += 0.5 * grad_out(r, c);
        g(r, a + 1) += 0.5 * grad_out(r, c);
      } else {
        g(r, a) += grad_out(r, c);
      }
    }
  }
  return g;
}

Affine add_affine(ParamStore& store, const std::string& prefix, std::size_t out, std::size_t in,
                  Rng& rng) {
  Affine layer;
  layer.weight = store.add(prefix + ".weight", fan_in_uniform(out, in, rng));
  layer.bias = store.add(prefix + ".bias", Matrix(out, 1));
  return layer;
}

}  // namespace

void EncoderDims::validate() const {
  require(vocab >= 1, "EncoderDims: vocab must be >= 1");
  require(frame_dim >= 1 && hidden >= 1, "EncoderDims: dimensions must be positive");
  require(speech_layers >= text_layers, "EncoderDims: speech_layers must be >= text_layers");
}

std::size_t ParamStore::add(std::string name, Matrix value) {
  require(!find(name).has_value(), "ParamStore: duplicate tensor name " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::vector<Matrix> ParamStore::zeros_like() const {
  std::vector<Matrix> out;
  out.reserve(values_.size());
  for (const Matrix& v : values_) out.emplace_back(v.rows(), v.cols());
  return out;
}

std::vector<std::size_t> Model::text_tensors() const {
  std::vector<std::size_t> out{text.embedding};
  for (const Affine& layer : text.layers) {
    out.push_back(layer.weight);
    out.push_back(layer.bias);
  }
  return out;
}

Model init_params(Seed seed, const EncoderDims& dims) {
  dims.validate();
  Rng rng(seed, streams::kInit);
  Model model;
  model.dims = dims;
  ParamStore& store = model.store;
  const std::size_t d = dims.hidden;

  model.speech.input = add_affine(store, "speech.input", d, dims.frame_dim, rng);
  for (std::size_t k = 0; k < dims.speech_layers; ++k)
    model.speech.layers.push_back(
        add_affine(store, "speech.layers." + std::to_string(k), d, d, rng));
  model.speech.output = add_affine(store, "speech.output", dims.vocab + 1, d, rng);

  model.text.embedding = store.add("text.embedding", fan_in_uniform(dims.vocab + 1, d, rng));
  const std::size_t first_shared = dims.speech_layers - dims.text_layers;
  for (std::size_t k = 0; k < dims.text_layers; ++k) {
    if (dims.share_last_layers) {
      model.text.layers.push_back(model.speech.layers[first_shared + k]);
    } else {
      model.text.layers.push_back(
          add_affine(store, "text.layers." + std::to_string(k), d, d, rng));
    }
  }
  return model;
}

std::size_t subsampled_length(std::size_t frames) { return ((frames + 1) / 2 + 1) / 2; }

SpeechOutput speech_forward(const Model& model, const Matrix& frames) {
  require(frames.cols() >= 1, "speech_forward: no frames");
  require(frames.rows() == model.dims.frame_dim,
          "speech_forward: frame dimension " + std::to_string(frames.rows()) +
              " does not match the encoder (" + std::to_string(model.dims.frame_dim) + ")");
  const ParamStore& store = model.store;
  SpeechOutput out;
  SpeechCache& c = out.cache;
  c.frames = frames;
  c.input_pre = affine_forward(store, model.speech.input, frames);
  c.input_post = relu(c.input_pre);
  c.half = pair_average(c.input_post);
  c.quarter = pair_average(c.half);
  const Matrix* h = &c.quarter;
  for (const Affine& layer : model.speech.layers) {
    c.layer_pre.push_back(affine_forward(store, layer, *h));
    c.layer_post.push_back(relu(c.layer_pre.back()));
    h = &c.layer_post.back();
  }
  out.features = *h;
  out.logits = affine_forward(store, model.speech.output, out.features).transposed();
  return out;
}

TextOutput text_forward(const Model& model, std::span<const int> tokens) {
  require(!tokens.empty(), "text_forward: empty token sequence");
  const Matrix& table = model.store.value(model.text.embedding);
  TextOutput out;
  TextCache& c = out.cache;
  c.tokens.assign(tokens.begin(), tokens.end());
  c.embedded = Matrix(model.dims.hidden, tokens.size());
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const int t = tokens[j];
    require(t >= 0 && static_cast<std::size_t>(t) < table.rows(),
            "text_forward: token " + std::to_string(t) + " outside vocabulary");
    c.embedded.set_column(j, table.row(static_cast<std::size_t>(t)));
  }
  const Matrix* h = &c.embedded;
  for (const Affine& layer : model.text.layers) {
    c.layer_pre.push_back(affine_forward(model.store, layer, *h));
    c.layer_post.push_back(relu(c.layer_pre.back()));
    h = &c.layer_post.back();
  }
  out.features = *h;
  return out;
}

Matrix speech_backward(const Model& model, const SpeechCache& cache, const Matrix& grad_features,
                       const Matrix& grad_logits, Gradients& grads) {
  require(grads.size() == model.store.size(), "speech_backward: gradient buffer mismatch");
  const ParamStore& store = model.store;
  const std::size_t layers = model.speech.layers.size();
  const Matrix& features = layers == 0 ? cache.quarter : cache.layer_post.back();

  Matrix grad_h(features.rows(), features.cols());
  if (!grad_features.empty()) {
    require(grad_features.same_shape(features), "speech_backward: feature gradient shape");
    grad_h += grad_features;
  }
  if (!grad_logits.empty()) {
    require(grad_logits.rows() == features.cols(), "speech_backward: logit gradient shape");
    grad_h += affine_backward(store, model.speech.output, features, grad_logits.transposed(),
                              grads);
  }
  for (std::size_t k = layers; k-- > 0;) {
    const Matrix& in = k == 0 ? cache.quarter : cache.layer_post[k - 1];
    const Matrix grad_pre = relu_backward(cache.layer_pre[k], grad_h);
    grad_h = affine_backward(store, model.speech.layers[k], in, grad_pre, grads);
  }
  const Matrix grad_half = pair_average_backward(cache.half.cols(), grad_h);
  const Matrix grad_post = pair_average_backward(cache.input_post.cols(), grad_half);
  const Matrix grad_pre = relu_backward(cache.input_pre, grad_post);
  return affine_backward(store, model.speech.input, cache.frames, grad_pre, grads);
}

void text_backward(const Model& model, const TextCache& cache, const Matrix& grad_features,
                   Gradients& grads) {
  require(grads.size() == model.store.size(), "text_backward: gradient buffer mismatch");
  if (grad_features.empty()) return;
  const std::size_t layers = model.text.layers.size();
  const Matrix& features = layers == 0 ? cache.embedded : cache.layer_post.back();
  require(grad_features.same_shape(features), "text_backward: feature gradient shape");
  Matrix grad_h = grad_features;
  for (std::size_t k = layers; k-- > 0;) {
    const Matrix& in = k == 0 ? cache.embedded : cache.layer_post[k - 1];
    const Matrix grad_pre = relu_backward(cache.layer_pre[k], grad_h);
    grad_h = affine_backward(model.store, model.text.layers[k], in, grad_pre, grads);
  }
  Matrix& table = grads[model.text.embedding];
  for (std::size_t j = 0; j < cache.tokens.size(); ++j) {
    auto row = table.row(static_cast<std::size_t>(cache.tokens[j]));
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += grad_h(k, j);
  }
}

}  // namespace otalign
