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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otalign/encoder.hpp"
#include "otalign/ot.hpp"
#include "otalign/random.hpp"
#include "otalign/seqdist.hpp"
#include "otalign/synth.hpp"

namespace otalign {

enum class LossKind { kCtc, kCtcOt, kCtcEuclidean, kCtcKl, kCtcAdversarial, kCtcSoftDtw };

std::string_view to_string(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view name);

// Auxiliary-loss sizes for the model built by the trainer. vocab and
// frame_dim come from the data.
struct ModelShape {
  std::size_t hidden = 32;
  std::size_t speech_layers = 4;
  std::size_t text_layers = 2;
  std::size_t disc_hidden = 64;
};

struct TrainConfig {
  LossKind loss_kind = LossKind::kCtcOt;
  double alpha = 0.1;       // weight of the auxiliary distance
  double ctc_weight = 1.0;  // weight of the CTC term
  OtConfig ot;
  LengthMatch length_match = LengthMatch::kInterpolate;
  double softdtw_smoothing = 1.0;
  bool share_last_layers = false;
  bool positional = true;  // append gamma-scaled positions before OT
  double lr_max = 5e-3;
  std::size_t warmup_steps = 100;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  double clip_norm = 10.0;
  std::optional<std::string> text_encoder_init;  // checkpoint path
  ModelShape model;

  void validate() const;
  // OT settings actually used for the auxiliary term and evaluation:
  // gamma forced to zero when the positional flag is off.
  OtConfig effective_ot() const;
};

// One optimizer step, or an epoch aggregate when `step` is empty.
struct StepMetrics {
  std::optional<std::size_t> step;
  std::size_t epoch = 0;
  double ctc_loss = 0.0;
  double aux_loss = 0.0;
  double total = 0.0;  // ctc_weight * ctc_loss + alpha * aux_loss
  double learning_rate = 0.0;
  double grad_norm = 0.0;  // before clipping
  std::size_t skipped = 0; // items dropped as CTC-infeasible
};

// lr_max * min(step / warmup, sqrt(warmup / step)) for step >= 1.
double learning_rate(std::size_t step, double lr_max, std::size_t warmup);

EncoderDims encoder_dims(const TrainConfig& cfg, std::size_t vocab, std::size_t frame_dim);

struct CombinedLoss {
  Gradients grads;  // mean over the items that were not skipped
  StepMetrics metrics;
};

// CTC on the speech logits plus alpha times the configured distance between
// the speech and text feature sequences, averaged over the batch. CTC is
// normalized by transcript length before averaging. Items whose transcript
// cannot be emitted are skipped and counted. For ctc+adversarial the
// auxiliary term is the generator loss against `disc` with dropout drawn
// from `dropout_stream`.
CombinedLoss combined_loss(std::span<const Sample* const> batch, const Model& model,
                           const TrainConfig& cfg, const DiscriminatorParams* disc = nullptr,
                           Rng* dropout_stream = nullptr);

// Adam with beta1 = 0.9, beta2 = 0.98, eps = 1e-9.
class Adam {
 public:
  void step(std::span<Matrix* const> params, std::span<const Matrix> grads, double lr);

 private:
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::size_t t_ = 0;
};

struct TrainResult {
  Model model;
  std::vector<StepMetrics> history;
};

using MetricsSink = std::function<void(const StepMetrics&)>;

// Fresh model for the config, with the text branch loaded from
// cfg.text_encoder_init when set.
Model build_model(const TrainConfig& cfg, std::size_t vocab, std::size_t frame_dim);

// Builds the model from cfg.seed (vocabulary taken from the data, see
// infer_vocab), optionally loads the text branch from
// cfg.text_encoder_init, then runs cfg.epochs epochs of shuffled minibatch
// Adam under the warmup / inverse-sqrt schedule. Every record is passed to
// `sink` as soon as it exists. Throws DivergenceError on a non-finite loss.
TrainResult train(const Dataset& data, const TrainConfig& cfg, const MetricsSink& sink = {});

// Continues training an existing model (used by train()).
TrainResult train_model(Model model, const Dataset& data, const TrainConfig& cfg,
                        const MetricsSink& sink = {});

struct EvalReport {
  double wer = 0.0;               // corpus-level: total edits / total reference tokens
  double mean_wasserstein = 0.0;  // mean debiased W between branch outputs
  double diagonal_mass = 0.0;     // mean plan mass on ground-truth aligned pairs
};

EvalReport evaluate(const Model& model, const Dataset& data, const TrainConfig& cfg);

// Copies the text branch of `source` (embedding, then text layer k to text
// layer k) into `target`. Throws IncompatibleError on a layer-count or shape
// mismatch. Speech tensors are left untouched unless shared.
void load_text_encoder(Model& target, const Model& source);

// Throws IncompatibleError if any sample does not fit the model.
void check_compatible(const Model& model, const Dataset& data);

}  // namespace otalign
