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

#include "otalign/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "otalign/ctc.hpp"
#include "otalign/encoder.hpp"
#include "otalign/errors.hpp"
#include "otalign/ot.hpp"
#include "otalign/random.hpp"
#include "otalign/seqdist.hpp"
#include "otalign/siamese.hpp"
#include "otalign/synth.hpp"

namespace otalign {

namespace {

constexpr double kStep = 1e-5;
constexpr double kTightTol = 1e-4;  // closed-form backward passes
constexpr double kLooseTol = 1e-3;  // Sinkhorn envelope and soft-DTW
constexpr std::size_t kProbesPerTensor = 12;

// A tensor the loss reads, and the analytic gradient claimed for it.
struct Target {
  Matrix* value;
  Matrix grad;
};

Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = scale * rng.normal();
  return m;
}

double dot(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

struct Suite {
  const GradcheckOptions& options;
  Rng& rng;
  std::vector<GradcheckRow>& rows;
  std::string module;

  // Compares `targets` against central differences of `loss`. Large tensors
  // are probed at kProbesPerTensor random coordinates.
  void check(const std::string& op, double tol, std::vector<Target> targets,
             const std::function<double()>& loss) {
    std::vector<std::pair<double, double>> pairs;  // (analytic, numeric)
    for (Target& t : targets) {
      auto x = t.value->data();
      auto g = t.grad.data();
      require(x.size() == g.size(), "gradcheck: gradient shape mismatch in " + op);
      std::vector<std::size_t> coords(x.size());
      for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
      if (coords.size() > kProbesPerTensor) {
        rng.shuffle(coords);
        coords.resize(kProbesPerTensor);
      }
      for (std::size_t i : coords) {
        const double saved = x[i];
        x[i] = saved + kStep;
        const double up = loss();
        x[i] = saved - kStep;
        const double down = loss();
        x[i] = saved;
        const double analytic = options.corrupt ? 1.1 * g[i] : g[i];
        pairs.emplace_back(analytic, (up - down) / (2.0 * kStep));
      }
    }
    double scale = 0.0;
    for (const auto& [a, n] : pairs) scale = std::max(scale, std::abs(n));
    const double floor = std::max(1e-3 * scale, 1e-12);
    double worst = 0.0;
    for (const auto& [a, n] : pairs) {
      const double err = std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
      worst = std::isfinite(err) ? std::max(worst, err) : INFINITY;
    }
    rows.push_back({module, op, worst, tol, pairs.size(), worst <= tol});
  }
};

void ctc_suites(Suite& s) {
  auto run = [&](const std::string& op, std::size_t frames, std::size_t vocab,
                 TokenSequence target) {
    Matrix logits = random_normal(frames, vocab + 1, s.rng);
    const CtcResult r = ctc_loss(log_softmax_rows(logits), target);
    s.check(op, kTightTol, {{&logits, r.grad}},
            [&] { return ctc_loss(log_softmax_rows(logits), target).loss; });
  };
  run("ctc_loss", 8, 4, {2, 4, 1});
  run("ctc_loss_repeats", 7, 3, {1, 1, 2});
  run("ctc_loss_tight", 3, 3, {3, 1, 2});
}

void ot_suites(Suite& s) {
  auto run = [&](const std::string& op, double p, double gamma, bool debias) {
    OtConfig cfg;
    cfg.p = p;
    cfg.gamma = gamma;
    cfg.debias = debias;
    cfg.tol = 1e-13;
    cfg.max_iter = 200000;
    Matrix u = random_normal(3, 5, s.rng);
    Matrix v = random_normal(3, 4, s.rng);
    const WassersteinResult r = wasserstein_loss(u, v, cfg);
    s.check(op, kLooseTol, {{&u, r.grad_u}, {&v, r.grad_v}},
            [&] { return wasserstein_loss(u, v, cfg).value; });
  };
  run("wasserstein_positional_debiased", 2.0, 1.0, true);
  run("wasserstein_plain", 2.0, 0.0, false);
  run("wasserstein_l1", 1.0, 1.0, true);
  run("wasserstein_l3", 3.0, 0.5, false);
}

void seqdist_suites(Suite& s) {
  for (LengthMatch match : {LengthMatch::kAverage, LengthMatch::kInterpolate,
                            LengthMatch::kAttention}) {
    for (bool kl : {false, true}) {
      Matrix u = random_normal(4, 7, s.rng);
      Matrix v = random_normal(4, 3, s.rng);
      auto value = [&] {
        const MatchedPair pair = match_lengths(match, u, v);
        return kl ? kl_loss(pair).value : euclidean_loss(pair).value;
      };
      const MatchedPair pair = match_lengths(match, u, v);
      const LossResult r = kl ? kl_loss(pair) : euclidean_loss(pair);
      auto [gu, gv] = match_lengths_backward(match, u, v, r.grad_u, r.grad_v);
      s.check(std::string(kl ? "kl_" : "euclidean_") + std::string(to_string(match)), kTightTol,
              {{&u, gu}, {&v, gv}}, value);
    }
  }
  {
    Matrix u = random_normal(3, 6, s.rng);
    Matrix v = random_normal(3, 4, s.rng);
    const LossResult r = soft_dtw(u, v, 0.5, 2.0);
    s.check("soft_dtw", kLooseTol, {{&u, r.grad_u}, {&v, r.grad_v}},
            [&] { return soft_dtw(u, v, 0.5, 2.0).value; });
  }
  {
    Rng init = s.rng.substream(1);
    DiscriminatorParams disc = DiscriminatorParams::init(4, 6, init);
    Matrix u = random_normal(4, 5, s.rng);
    Matrix v = random_normal(4, 3, s.rng);
    const Rng dropout = s.rng.substream(2);
    auto eval = [&](AdversarialMode mode) {
      Rng masks = dropout;  // identical masks on every evaluation
      return adversarial_losses(u, v, disc, mode, &masks);
    };
    const AdversarialResult gen = eval(AdversarialMode::kTrainGenerator);
    s.check("adversarial_generator", kTightTol, {{&u, gen.grad_u}, {&v, gen.grad_v}},
            [&] { return eval(AdversarialMode::kTrainGenerator).value; });
    const AdversarialResult dis = eval(AdversarialMode::kTrainDiscriminator);
    const DiscriminatorParams& g = dis.grad_disc;
    s.check("adversarial_discriminator", kTightTol,
            {{&disc.w1, g.w1}, {&disc.b1, g.b1}, {&disc.w2, g.w2},
             {&disc.b2, g.b2}, {&disc.w3, g.w3}, {&disc.b3, g.b3}},
            [&] { return eval(AdversarialMode::kTrainDiscriminator).value; });
  }
}

// Freshly initialized biases are exactly zero, so a frame that switches off
// every unit of one layer leaves the next pre-activation exactly on the ReLU
// kink. Jittering every tensor moves the check point off the kinks.
void jitter(Model& model, Rng& rng) {
  for (std::size_t k = 0; k < model.store.size(); ++k)
    for (double& x : model.store.value(k).data()) x += 0.1 * rng.normal();
}

EncoderDims small_dims(bool shared) {
  EncoderDims dims;
  dims.vocab = 5;
  dims.frame_dim = 4;
  dims.hidden = 6;
  dims.speech_layers = 3;
  dims.text_layers = 2;
  dims.share_last_layers = shared;
  return dims;
}

// Projects both branches onto fixed random directions and checks every
// parameter tensor (and the input frames) of the composed scalar.
void encoder_suite(Suite& s, const std::string& op, bool speech, bool text, bool shared) {
  Model model = init_params(Seed{s.rng.next_u64()}, small_dims(shared));
  jitter(model, s.rng);
  Matrix frames = random_normal(model.dims.frame_dim, 11, s.rng);
  const TokenSequence tokens{3, 1, 5, 3};
  const SpeechOutput so = speech_forward(model, frames);
  const TextOutput to = text_forward(model, tokens);
  const Matrix gf = random_normal(so.features.rows(), so.features.cols(), s.rng);
  const Matrix gl = random_normal(so.logits.rows(), so.logits.cols(), s.rng);
  const Matrix gt = random_normal(to.features.rows(), to.features.cols(), s.rng);

  Gradients grads = model.store.zeros_like();
  Matrix grad_frames;
  if (speech) grad_frames = speech_backward(model, so.cache, gf, gl, grads);
  if (text) text_backward(model, to.cache, gt, grads);

  std::vector<Target> targets;
  for (std::size_t k = 0; k < model.store.size(); ++k)
    targets.push_back({&model.store.value(k), grads[k]});
  if (speech) targets.push_back({&frames, grad_frames});
  s.check(op, kTightTol, targets, [&] {
    double v = 0.0;
    if (speech) {
      const SpeechOutput o = speech_forward(model, frames);
      v += dot(gf, o.features) + dot(gl, o.logits);
    }
    if (text) v += dot(gt, text_forward(model, tokens).features);
    return v;
  });
}

void encoder_suites(Suite& s) {
  encoder_suite(s, "speech_encoder", true, false, false);
  encoder_suite(s, "text_encoder", false, true, false);
  encoder_suite(s, "shared_encoders", true, true, true);
}

void siamese_suites(Suite& s) {
  SynthConfig sc;
  sc.vocab = 5;
  sc.frame_dim = 4;
  sc.repeat_min = 2;
  sc.repeat_max = 4;
  sc.transcript_len_min = 2;
  sc.transcript_len_max = 3;
  sc.n_samples = 2;
  sc.seed = s.rng.next_u64();
  const Dataset data = generate(sc);
  const std::vector<const Sample*> batch{&data[0], &data[1]};

  for (LossKind kind : {LossKind::kCtc, LossKind::kCtcOt, LossKind::kCtcEuclidean, LossKind::kCtcKl,
                        LossKind::kCtcSoftDtw, LossKind::kCtcAdversarial}) {
    TrainConfig cfg;
    cfg.loss_kind = kind;
    cfg.alpha = 0.5;
    cfg.length_match = LengthMatch::kAttention;
    cfg.ot.tol = 1e-13;
    cfg.ot.max_iter = 200000;
    cfg.model = {6, 3, 2, 8};
    cfg.share_last_layers = true;
    Model model = init_params(Seed{s.rng.next_u64()}, encoder_dims(cfg, sc.vocab, sc.frame_dim));
    jitter(model, s.rng);
    Rng init = s.rng.substream(3);
    const DiscriminatorParams disc = DiscriminatorParams::init(model.dims.hidden, 8, init);
    const Rng dropout = s.rng.substream(4);
    auto eval = [&] {
      Rng masks = dropout;
      return combined_loss(batch, model, cfg, &disc, &masks);
    };
    const CombinedLoss base = eval();
    std::vector<Target> targets;
    for (std::size_t k = 0; k < model.store.size(); ++k)
      targets.push_back({&model.store.value(k), base.grads[k]});
    const bool loose = kind == LossKind::kCtcOt || kind == LossKind::kCtcSoftDtw;
    s.check("combined_" + std::string(to_string(kind)), loose ? kLooseTol : kTightTol, targets,
            [&] { return eval().metrics.total; });
  }
}

}  // namespace

const std::vector<std::string>& gradcheck_modules() {
  static const std::vector<std::string> names{"ctc", "ot", "seqdist", "encoder", "siamese"};
  return names;
}

std::vector<GradcheckRow> run_gradchecks(const GradcheckOptions& options) {
  if (options.module &&
      std::find(gradcheck_modules().begin(), gradcheck_modules().end(), *options.module) ==
          gradcheck_modules().end())
    throw InputError("unknown gradcheck module '" + *options.module + "'");
  using SuiteFn = void (*)(Suite&);
  const std::vector<std::pair<std::string, SuiteFn>> suites{{"ctc", ctc_suites},
                                                            {"ot", ot_suites},
                                                            {"seqdist", seqdist_suites},
                                                            {"encoder", encoder_suites},
                                                            {"siamese", siamese_suites}};
  std::vector<GradcheckRow> rows;
  Rng root(Seed{options.seed}, streams::kGradcheck);
  for (std::size_t k = 0; k < suites.size(); ++k) {
    if (options.module && *options.module != suites[k].first) continue;
    Rng rng = root.substream(k);  // filtering does not shift other suites
    Suite suite{options, rng, rows, suites[k].first};
    suites[k].second(suite);
  }
  return rows;
}

}  // namespace otalign
