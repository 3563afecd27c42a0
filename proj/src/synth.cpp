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

#include "otalign/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "otalign/encoder.hpp"
#include "otalign/errors.hpp"
#include "otalign/random.hpp"

namespace otalign {

namespace {

constexpr int kMaxRedraws = 10000;

std::size_t draw_between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

}  // namespace

void SynthConfig::validate() const {
  require(vocab >= 2, "SynthConfig: vocab must be >= 2");
  require(frame_dim >= 1, "SynthConfig: frame_dim must be >= 1");
  require(repeat_min >= 1 && repeat_min <= repeat_max,
          "SynthConfig: need 1 <= repeat_min <= repeat_max");
  require(transcript_len_min >= 1 && transcript_len_min <= transcript_len_max,
          "SynthConfig: need 1 <= transcript_len_min <= transcript_len_max");
  require(noise_sigma >= 0.0, "SynthConfig: noise_sigma must be >= 0");
}

Matrix synth_prototypes(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(Seed{cfg.seed}, streams::kPrototypes);
  const double min_separation =
      4.0 * cfg.noise_sigma / std::sqrt(static_cast<double>(cfg.frame_dim));
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    Matrix protos(cfg.frame_dim, cfg.vocab);
    for (std::size_t k = 0; k < cfg.vocab; ++k) {
      double norm = 0.0;
      while (norm == 0.0) {
        norm = 0.0;
        for (std::size_t r = 0; r < cfg.frame_dim; ++r) {
          protos(r, k) = rng.normal();
          norm += protos(r, k) * protos(r, k);
        }
        norm = std::sqrt(norm);
      }
      for (std::size_t r = 0; r < cfg.frame_dim; ++r) protos(r, k) /= norm;
    }
    double closest = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < cfg.vocab; ++a) {
      for (std::size_t b = a + 1; b < cfg.vocab; ++b) {
        double s = 0.0;
        for (std::size_t r = 0; r < cfg.frame_dim; ++r)
          s += (protos(r, a) - protos(r, b)) * (protos(r, a) - protos(r, b));
        closest = std::min(closest, std::sqrt(s));
      }
    }
    if (closest > min_separation) return protos;
  }
  throw ContractError("synth_prototypes: could not draw separated prototypes");
}

Dataset generate(const SynthConfig& cfg) {
  const Matrix protos = synth_prototypes(cfg);
  Rng rng(Seed{cfg.seed}, streams::kSamples);
  Dataset data;
  data.reserve(cfg.n_samples);
  while (data.size() < cfg.n_samples) {
    Sample s;
    int redraws = 0;
    for (;;) {
      const std::size_t len = draw_between(rng, cfg.transcript_len_min, cfg.transcript_len_max);
      s.transcript.resize(len);
      for (std::size_t k = 0; k < len; ++k) {
        if (k == 0 || cfg.adjacent_repeats) {
          s.transcript[k] = static_cast<int>(1 + rng.below(cfg.vocab));
        } else {
          // Uniform over the vocab - 1 tokens that differ from the previous one.
          int t = static_cast<int>(1 + rng.below(cfg.vocab - 1));
          if (t >= s.transcript[k - 1]) ++t;
          s.transcript[k] = t;
        }
      }
      s.segments.clear();
      std::size_t frames = 0;
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t r = draw_between(rng, cfg.repeat_min, cfg.repeat_max);
        s.segments.push_back({frames, frames + r});
        frames += r;
      }
      s.frames = Matrix(cfg.frame_dim, frames);
      for (std::size_t k = 0; k < len; ++k) {
        const auto proto = static_cast<std::size_t>(s.transcript[k] - 1);
        for (std::size_t c = s.segments[k].start; c < s.segments[k].end; ++c)
          for (std::size_t r = 0; r < cfg.frame_dim; ++r)
            s.frames(r, c) = protos(r, proto) + cfg.noise_sigma * rng.normal();
      }
      if (!cfg.ensure_ctc_feasible ||
          subsampled_length(frames) >= ctc_min_frames(s.transcript))
        break;
      if (++redraws >= kMaxRedraws)
        throw ContractError("generate: repeat range too short for CTC after subsampling");
    }
    data.push_back(std::move(s));
  }
  return data;
}

double diagonal_mass(const Matrix& plan, const Sample& sample, std::size_t subsample_factor) {
  require(subsample_factor >= 1, "diagonal_mass: subsample factor must be >= 1");
  const std::size_t frames = sample.frames.cols();
  const std::size_t rows = (frames + subsample_factor - 1) / subsample_factor;
  if (plan.rows() != rows || plan.cols() != sample.transcript.size())
    throw ContractError("diagonal_mass: plan is " + std::to_string(plan.rows()) + "x" +
                        std::to_string(plan.cols()) + ", sample needs " + std::to_string(rows) +
                        "x" + std::to_string(sample.transcript.size()));
  double on = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t lo = i * subsample_factor;
    const std::size_t hi = std::min(lo + subsample_factor, frames);
    for (std::size_t j = 0; j < plan.cols(); ++j) {
      const double z = plan(i, j);
      total += z;
      if (lo < sample.segments[j].end && sample.segments[j].start < hi) on += z;
    }
  }
  return total > 0.0 ? on / total : 0.0;
}

std::size_t infer_vocab(const Dataset& data) {
  int top = 0;
  for (const Sample& s : data)
    for (int t : s.transcript) top = std::max(top, t);
  require(top >= 1, "infer_vocab: no tokens in dataset");
  return static_cast<std::size_t>(top);
}

}  // namespace otalign
