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

#include "otalign/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "otalign/ctc.hpp"
#include "otalign/errors.hpp"
#include "otalign/io.hpp"

namespace otalign {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.98;
constexpr double kAdamEps = 1e-9;

// Sub-stream of the init stream reserved for the discriminator, so adding
// one never changes the encoder initialization.
constexpr std::uint64_t kDiscriminatorInit = 1;

double global_norm(std::span<const Matrix> grads) {
  double s = 0.0;
  for (const Matrix& g : grads) s += g.squared_norm();
  return std::sqrt(s);
}

// Squares of anything past this overflow inside the aux losses, so such
// activations count as divergence. The caller fills in the step.
constexpr double kActivationLimit = 1e100;

void require_finite(const Matrix& m) {
  if (!m.all_finite() || m.max_abs() > kActivationLimit)
    throw DivergenceError("activations overflowed", 0);
}

std::vector<Matrix*> disc_tensors(DiscriminatorParams& d) {
  return {&d.w1, &d.b1, &d.w2, &d.b2, &d.w3, &d.b3};
}

std::vector<Matrix> disc_grads(const DiscriminatorParams& g) {
  return {g.w1, g.b1, g.w2, g.b2, g.w3, g.b3};
}

// Discriminator update on detached encoder features.
void discriminator_step(std::span<const Sample* const> batch, const Model& model,
                        DiscriminatorParams& disc, Adam& adam, Rng& dropout, double lr) {
  DiscriminatorParams total = disc.zeros_like();
  for (const Sample* s : batch) {
    const SpeechOutput speech = speech_forward(model, s->frames);
    const TextOutput text = text_forward(model, s->transcript);
    require_finite(speech.features);
    require_finite(text.features);
    const AdversarialResult r = adversarial_losses(
        speech.features, text.features, disc, AdversarialMode::kTrainDiscriminator, &dropout);
    auto acc = disc_tensors(total);
    const auto g = disc_grads(r.grad_disc);
    for (std::size_t k = 0; k < acc.size(); ++k) *acc[k] += g[k];
  }
  std::vector<Matrix> grads = disc_grads(total);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (Matrix& g : grads) g *= scale;
  auto params = disc_tensors(disc);
  adam.step(params, grads, lr);
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCtc: return "ctc";
    case LossKind::kCtcOt: return "ctc+ot";
    case LossKind::kCtcEuclidean: return "ctc+euclidean";
    case LossKind::kCtcKl: return "ctc+kl";
    case LossKind::kCtcAdversarial: return "ctc+adversarial";
    case LossKind::kCtcSoftDtw: return "ctc+softdtw";
  }
  return "unknown";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) {
  for (LossKind k : {LossKind::kCtc, LossKind::kCtcOt, LossKind::kCtcEuclidean, LossKind::kCtcKl,
                     LossKind::kCtcAdversarial, LossKind::kCtcSoftDtw})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

void TrainConfig::validate() const {
  require(alpha >= 0.0, "TrainConfig: alpha must be >= 0");
  require(ctc_weight >= 0.0, "TrainConfig: ctc_weight must be >= 0");
  require(warmup_steps >= 1, "TrainConfig: warmup_steps must be >= 1");
  require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  require(lr_max > 0.0, "TrainConfig: lr_max must be > 0");
  require(softdtw_smoothing > 0.0, "TrainConfig: softdtw_smoothing must be > 0");
  require(clip_norm > 0.0, "TrainConfig: clip_norm must be > 0");
  require(model.speech_layers >= model.text_layers,
          "TrainConfig: speech_layers must be >= text_layers");
  require(model.disc_hidden >= 1, "TrainConfig: disc_hidden must be >= 1");
  ot.validate();
}

OtConfig TrainConfig::effective_ot() const {
  OtConfig out = ot;
  if (!positional) out.gamma = 0.0;
  return out;
}

double learning_rate(std::size_t step, double lr_max, std::size_t warmup) {
  require(step >= 1 && warmup >= 1, "learning_rate: step and warmup start at 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return lr_max * std::min(s / w, std::sqrt(w / s));
}

EncoderDims encoder_dims(const TrainConfig& cfg, std::size_t vocab, std::size_t frame_dim) {
  EncoderDims dims;
  dims.vocab = vocab;
  dims.frame_dim = frame_dim;
  dims.hidden = cfg.model.hidden;
  dims.speech_layers = cfg.model.speech_layers;
  dims.text_layers = cfg.model.text_layers;
  dims.share_last_layers = cfg.share_last_layers;
  return dims;
}

CombinedLoss combined_loss(std::span<const Sample* const> batch, const Model& model,
                           const TrainConfig& cfg, const DiscriminatorParams* disc,
                           Rng* dropout_stream) {
  CombinedLoss out;
  out.grads = model.store.zeros_like();
  if (cfg.loss_kind == LossKind::kCtcAdversarial)
    require(disc != nullptr, "combined_loss: ctc+adversarial needs a discriminator");
  const OtConfig ot = cfg.effective_ot();

  std::size_t used = 0;
  double ctc_sum = 0.0;
  double aux_sum = 0.0;
  for (const Sample* sample : batch) {
    const SpeechOutput speech = speech_forward(model, sample->frames);
    require_finite(speech.logits);
    require_finite(speech.features);
    const Matrix log_probs = log_softmax_rows(speech.logits);
    CtcResult ctc;
    try {
      ctc = ctc_loss(log_probs, sample->transcript);
    } catch (const InfeasibleError&) {
      ++out.metrics.skipped;
      continue;
    }
    ++used;
    const double tokens = static_cast<double>(sample->transcript.size());
    ctc_sum += ctc.loss / tokens;
    Matrix grad_logits = ctc.grad * (cfg.ctc_weight / tokens);

    if (cfg.loss_kind == LossKind::kCtc) {
      speech_backward(model, speech.cache, Matrix(), grad_logits, out.grads);
      continue;
    }

    const TextOutput text = text_forward(model, sample->transcript);
    require_finite(text.features);
    const Matrix& u = speech.features;
    const Matrix& v = text.features;
    double aux = 0.0;
    Matrix grad_u, grad_v;
    switch (cfg.loss_kind) {
      case LossKind::kCtcOt: {
        WassersteinResult w = wasserstein_loss(u, v, ot);
        aux = w.value;
        grad_u = std::move(w.grad_u);
        grad_v = std::move(w.grad_v);
        break;
      }
      case LossKind::kCtcEuclidean:
      case LossKind::kCtcKl: {
        const MatchedPair pair = match_lengths(cfg.length_match, u, v);
        const LossResult r = cfg.loss_kind == LossKind::kCtcKl ? kl_loss(pair) : euclidean_loss(pair);
        aux = r.value;
        std::tie(grad_u, grad_v) = match_lengths_backward(cfg.length_match, u, v, r.grad_u, r.grad_v);
        break;
      }
      case LossKind::kCtcSoftDtw: {
        LossResult r = soft_dtw(u, v, cfg.softdtw_smoothing, cfg.ot.p);
        aux = r.value;
        grad_u = std::move(r.grad_u);
        grad_v = std::move(r.grad_v);
        break;
      }
      case LossKind::kCtcAdversarial: {
        AdversarialResult r =
            adversarial_losses(u, v, *disc, AdversarialMode::kTrainGenerator, dropout_stream);
        aux = r.value;
        grad_u = std::move(r.grad_u);
        grad_v = std::move(r.grad_v);
        break;
      }
      case LossKind::kCtc:
        break;
    }
    aux_sum += aux;
    grad_u *= cfg.alpha;
    grad_v *= cfg.alpha;
    speech_backward(model, speech.cache, grad_u, grad_logits, out.grads);
    text_backward(model, text.cache, grad_v, out.grads);
  }

  if (used > 0) {
    const double scale = 1.0 / static_cast<double>(used);
    for (Matrix& g : out.grads) g *= scale;
    out.metrics.ctc_loss = ctc_sum * scale;
    out.metrics.aux_loss = aux_sum * scale;
  }
  out.metrics.total = cfg.ctc_weight * out.metrics.ctc_loss + cfg.alpha * out.metrics.aux_loss;
  return out;
}

void Adam::step(std::span<Matrix* const> params, std::span<const Matrix> grads, double lr) {
  require(params.size() == grads.size(), "Adam::step: parameter/gradient count mismatch");
  if (first_.empty()) {
    for (const Matrix& g : grads) {
      first_.emplace_back(g.rows(), g.cols());
      second_.emplace_back(g.rows(), g.cols());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->data();
    auto g = grads[k].data();
    auto m = first_[k].data();
    auto v = second_[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
      v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kAdamEps);
    }
  }
}

void load_text_encoder(Model& target, const Model& source) {
  if (target.text.layers.size() != source.text.layers.size())
    throw IncompatibleError("text encoder init: checkpoint has " +
                            std::to_string(source.text.layers.size()) + " text layers, model has " +
                            std::to_string(target.text.layers.size()));
  std::vector<std::pair<std::size_t, std::size_t>> pairs{
      {target.text.embedding, source.text.embedding}};
  for (std::size_t k = 0; k < target.text.layers.size(); ++k) {
    pairs.emplace_back(target.text.layers[k].weight, source.text.layers[k].weight);
    pairs.emplace_back(target.text.layers[k].bias, source.text.layers[k].bias);
  }
  for (const auto& [to, from] : pairs) {
    const Matrix& src = source.store.value(from);
    Matrix& dst = target.store.value(to);
    if (!dst.same_shape(src))
      throw IncompatibleError("text encoder init: tensor " + target.store.name(to) + " is " +
                              std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()) +
                              " but checkpoint tensor " + source.store.name(from) + " is " +
                              std::to_string(src.rows()) + "x" + std::to_string(src.cols()));
    dst = src;
  }
}

void check_compatible(const Model& model, const Dataset& data) {
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Sample& s = data[n];
    if (s.frames.rows() != model.dims.frame_dim)
      throw IncompatibleError("sample " + std::to_string(n) + " has frame dimension " +
                              std::to_string(s.frames.rows()) + ", model expects " +
                              std::to_string(model.dims.frame_dim));
    for (int t : s.transcript)
      if (t < 1 || static_cast<std::size_t>(t) > model.dims.vocab)
        throw IncompatibleError("sample " + std::to_string(n) + " has token " + std::to_string(t) +
                                " outside vocabulary 1.." + std::to_string(model.dims.vocab));
  }
}

Model build_model(const TrainConfig& cfg, std::size_t vocab, std::size_t frame_dim) {
  Model model = init_params(Seed{cfg.seed}, encoder_dims(cfg, vocab, frame_dim));
  if (cfg.text_encoder_init) {
    const Checkpoint source = read_checkpoint(*cfg.text_encoder_init);
    load_text_encoder(model, source.model);
  }
  return model;
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, const MetricsSink& sink) {
  require(!data.empty(), "train: empty dataset");
  return train_model(build_model(cfg, infer_vocab(data), data.front().frames.rows()), data, cfg,
                     sink);
}

TrainResult train_model(Model model, const Dataset& data, const TrainConfig& cfg,
                        const MetricsSink& sink) {
  cfg.validate();
  require(!data.empty(), "train: empty dataset");
  check_compatible(model, data);

  TrainResult result;
  const bool adversarial = cfg.loss_kind == LossKind::kCtcAdversarial;
  Rng shuffle_root(Seed{cfg.seed}, streams::kShuffle);
  Rng dropout(Seed{cfg.seed}, streams::kDropout);
  DiscriminatorParams disc;
  if (adversarial) {
    Rng init = Rng(Seed{cfg.seed}, streams::kInit).substream(kDiscriminatorInit);
    disc = DiscriminatorParams::init(model.dims.hidden, cfg.model.disc_hidden, init);
  }
  Adam adam;
  Adam disc_adam;
  std::vector<Matrix*> params;
  for (std::size_t k = 0; k < model.store.size(); ++k) params.push_back(&model.store.value(k));

  std::size_t step = 0;
  std::vector<std::size_t> order(data.size());
  std::vector<const Sample*> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = shuffle_root.substream(epoch);
    shuffle.shuffle(order);

    StepMetrics summary;
    summary.epoch = epoch;
    std::size_t steps_in_epoch = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      ++step;
      const double lr = learning_rate(step, cfg.lr_max, cfg.warmup_steps);
      batch.clear();
      for (std::size_t k = start; k < std::min(start + cfg.batch_size, order.size()); ++k)
        batch.push_back(&data[order[k]]);

      CombinedLoss loss;
      try {
        if (adversarial) discriminator_step(batch, model, disc, disc_adam, dropout, lr);
        loss = combined_loss(batch, model, cfg, adversarial ? &disc : nullptr,
                             adversarial ? &dropout : nullptr);
      } catch (const DivergenceError& e) {
        throw DivergenceError("training diverged at step " + std::to_string(step) + " (" +
                                  e.what() + ")",
                              step);
      }
      const double norm = global_norm(loss.grads);
      if (!std::isfinite(loss.metrics.total) || !std::isfinite(norm))
        throw DivergenceError("training diverged at step " + std::to_string(step) +
                                  " (total loss " + std::to_string(loss.metrics.total) + ")",
                              step);
      if (norm > cfg.clip_norm)
        for (Matrix& g : loss.grads) g *= cfg.clip_norm / norm;
      adam.step(params, loss.grads, lr);

      StepMetrics m = loss.metrics;
      m.step = step;
      m.epoch = epoch;
      m.learning_rate = lr;
      m.grad_norm = norm;
      if (sink) sink(m);
      result.history.push_back(m);

      ++steps_in_epoch;
      summary.ctc_loss += m.ctc_loss;
      summary.aux_loss += m.aux_loss;
      summary.grad_norm += m.grad_norm;
      summary.skipped += m.skipped;
      summary.learning_rate = lr;
    }
    const double scale = 1.0 / static_cast<double>(steps_in_epoch);
    summary.ctc_loss *= scale;
    summary.aux_loss *= scale;
    summary.grad_norm *= scale;
    summary.total = cfg.ctc_weight * summary.ctc_loss + cfg.alpha * summary.aux_loss;
    if (sink) sink(summary);
    result.history.push_back(summary);
  }
  result.model = std::move(model);
  return result;
}

EvalReport evaluate(const Model& model, const Dataset& data, const TrainConfig& cfg) {
  check_compatible(model, data);
  EvalReport report;
  if (data.empty()) return report;
  OtConfig ot = cfg.effective_ot();
  ot.debias = true;
  std::size_t edits = 0;
  std::size_t reference = 0;
  for (const Sample& s : data) {
    const SpeechOutput speech = speech_forward(model, s.frames);
    const TokenSequence hyp = greedy_decode(log_softmax_rows(speech.logits));
    edits += edit_distance(s.transcript, hyp);
    reference += s.transcript.size();
    const TextOutput text = text_forward(model, s.transcript);
    const WassersteinResult w = wasserstein_loss(speech.features, text.features, ot);
    report.mean_wasserstein += w.value;
    report.diagonal_mass += diagonal_mass(w.plan.plan, s, 4);
  }
  const double n = static_cast<double>(data.size());
  report.wer = static_cast<double>(edits) / static_cast<double>(reference);
  report.mean_wasserstein /= n;
  report.diagonal_mass /= n;
  return report;
}

}  // namespace otalign
