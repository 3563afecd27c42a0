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

#include "otalign/io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>
#include <type_traits>

#include "json.hpp"
#include "otalign/errors.hpp"

namespace otalign {

namespace {

using json = nlohmann::json;
using ordered = nlohmann::ordered_json;

constexpr const char* kCheckpointFormat = "otalign-checkpoint";
constexpr int kCheckpointVersion = 1;
static_assert(std::is_same_v<std::size_t, std::uint64_t>, "seeds are read as size_t");

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

// Reads keys out of one JSON object and remembers which were used, so any
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw InputError("config key '" + path_ + "': expected an object");
  }

  void get(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  // Also covers the uint64_t seeds.
  void get(const char* key, std::size_t& out) { get_unsigned(key, out); }
  void get(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::optional<std::string>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        fail(key, "expected a string or null");
      }
    }
  }
  void get(const char* key, LossKind& out) {
    if (const json* v = find(key)) {
      const auto kind = v->is_string() ? parse_loss_kind(v->get<std::string>()) : std::nullopt;
      if (!kind)
        fail(key, "expected one of ctc, ctc+ot, ctc+euclidean, ctc+kl, ctc+adversarial, ctc+softdtw");
      out = *kind;
    }
  }
  void get(const char* key, LengthMatch& out) {
    if (const json* v = find(key)) {
      const auto kind = v->is_string() ? parse_length_match(v->get<std::string>()) : std::nullopt;
      if (!kind) fail(key, "expected one of average, interpolate, attention");
      out = *kind;
    }
  }

  const json* child(const char* key) { return find(key); }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!used_.count(key)) throw InputError("unknown config key '" + join(key) + "'");
  }

 private:
  const json* find(const char* key) {
    used_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  template <class T>
  void get_unsigned(const char* key, T& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned())
        fail(key, "expected a non-negative integer");
      out = v->get<T>();
    }
  }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  [[noreturn]] void fail(const char* key, const std::string& msg) const {
    throw InputError("config key '" + join(key) + "': " + msg);
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

RunConfig run_config_from(const json& root) {
  RunConfig cfg;
  Section top(root, "");
  if (const json* s = top.child("synth")) {
    Section sec(*s, "synth");
    SynthConfig& c = cfg.synth;
    sec.get("vocab", c.vocab);
    sec.get("frame_dim", c.frame_dim);
    sec.get("repeat_min", c.repeat_min);
    sec.get("repeat_max", c.repeat_max);
    sec.get("noise_sigma", c.noise_sigma);
    sec.get("transcript_len_min", c.transcript_len_min);
    sec.get("transcript_len_max", c.transcript_len_max);
    sec.get("n_samples", c.n_samples);
    sec.get("seed", c.seed);
    sec.get("ensure_ctc_feasible", c.ensure_ctc_feasible);
    sec.get("adjacent_repeats", c.adjacent_repeats);
    sec.finish();
  }
  if (const json* s = top.child("train")) {
    Section sec(*s, "train");
    TrainConfig& c = cfg.train;
    sec.get("loss_kind", c.loss_kind);
    sec.get("alpha", c.alpha);
    sec.get("ctc_weight", c.ctc_weight);
    sec.get("length_match", c.length_match);
    sec.get("softdtw_smoothing", c.softdtw_smoothing);
    sec.get("share_last_layers", c.share_last_layers);
    sec.get("positional", c.positional);
    sec.get("lr_max", c.lr_max);
    sec.get("warmup_steps", c.warmup_steps);
    sec.get("epochs", c.epochs);
    sec.get("batch_size", c.batch_size);
    sec.get("seed", c.seed);
    sec.get("clip_norm", c.clip_norm);
    sec.get("text_encoder_init", c.text_encoder_init);
    sec.finish();
  }
  if (const json* s = top.child("ot")) {
    Section sec(*s, "ot");
    OtConfig& c = cfg.train.ot;
    sec.get("lambda", c.lambda);
    sec.get("p", c.p);
    sec.get("gamma", c.gamma);
    sec.get("max_iter", c.max_iter);
    sec.get("tol", c.tol);
    sec.get("debias", c.debias);
    sec.finish();
  }
  if (const json* s = top.child("model")) {
    Section sec(*s, "model");
    ModelShape& c = cfg.train.model;
    sec.get("hidden", c.hidden);
    sec.get("speech_layers", c.speech_layers);
    sec.get("text_layers", c.text_layers);
    sec.get("disc_hidden", c.disc_hidden);
    sec.finish();
  }
  top.finish();
  try {
    cfg.synth.validate();
    cfg.train.validate();
  } catch (const ContractError& e) {
    throw InputError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

ordered run_config_json(const RunConfig& cfg) {
  const SynthConfig& s = cfg.synth;
  const TrainConfig& t = cfg.train;
  ordered out;
  out["synth"] = {{"vocab", s.vocab},
                  {"frame_dim", s.frame_dim},
                  {"repeat_min", s.repeat_min},
                  {"repeat_max", s.repeat_max},
                  {"noise_sigma", s.noise_sigma},
                  {"transcript_len_min", s.transcript_len_min},
                  {"transcript_len_max", s.transcript_len_max},
                  {"n_samples", s.n_samples},
                  {"seed", s.seed},
                  {"ensure_ctc_feasible", s.ensure_ctc_feasible},
                  {"adjacent_repeats", s.adjacent_repeats}};
  out["train"] = {{"loss_kind", std::string(to_string(t.loss_kind))},
                  {"alpha", t.alpha},
                  {"ctc_weight", t.ctc_weight},
                  {"length_match", std::string(to_string(t.length_match))},
                  {"softdtw_smoothing", t.softdtw_smoothing},
                  {"share_last_layers", t.share_last_layers},
                  {"positional", t.positional},
                  {"lr_max", t.lr_max},
                  {"warmup_steps", t.warmup_steps},
                  {"epochs", t.epochs},
                  {"batch_size", t.batch_size},
                  {"seed", t.seed},
                  {"clip_norm", t.clip_norm},
                  {"text_encoder_init", t.text_encoder_init ? ordered(*t.text_encoder_init) : ordered()}};
  out["ot"] = {{"lambda", t.ot.lambda}, {"p", t.ot.p},     {"gamma", t.ot.gamma},
               {"max_iter", t.ot.max_iter}, {"tol", t.ot.tol}, {"debias", t.ot.debias}};
  out["model"] = {{"hidden", t.model.hidden},
                  {"speech_layers", t.model.speech_layers},
                  {"text_layers", t.model.text_layers},
                  {"disc_hidden", t.model.disc_hidden}};
  return out;
}

void append_double(std::string& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}

std::size_t as_index(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) throw InputError(where + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

double as_double(const json& v, const std::string& where) {
  if (!v.is_number()) throw InputError(where + ": expected a number");
  return v.get<double>();
}

const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw InputError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw InputError(where + ": missing key '" + key + "'");
  return *it;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  return run_config_from(parse_json(text, "config"));
}

std::string run_config_to_json(const RunConfig& cfg) { return run_config_json(cfg).dump(2) + "\n"; }

std::string dataset_to_json(const Dataset& data) {
  std::string out = "[";
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Sample& s = data[n];
    out += n ? ",\n" : "\n";
    out += "{\"frames\": [";
    for (std::size_t t = 0; t < s.frames.cols(); ++t) {
      out += t ? ", [" : "[";
      for (std::size_t r = 0; r < s.frames.rows(); ++r) {
        if (r) out += ", ";
        append_double(out, s.frames(r, t));
      }
      out += "]";
    }
    out += "], \"transcript\": [";
    for (std::size_t k = 0; k < s.transcript.size(); ++k) {
      if (k) out += ", ";
      out += std::to_string(s.transcript[k]);
    }
    out += "], \"segments\": [";
    for (std::size_t k = 0; k < s.segments.size(); ++k) {
      if (k) out += ", ";
      out += "[" + std::to_string(s.segments[k].start) + ", " + std::to_string(s.segments[k].end) +
             "]";
    }
    out += "]}";
  }
  out += "\n]\n";
  return out;
}

Dataset parse_dataset(const std::string& text) {
  const json root = parse_json(text, "dataset");
  if (!root.is_array()) throw InputError("dataset: expected a JSON array of samples");
  Dataset data;
  data.reserve(root.size());
  for (std::size_t n = 0; n < root.size(); ++n) {
    const std::string where = "dataset sample " + std::to_string(n);
    const json& frames = member(root[n], "frames", where);
    const json& transcript = member(root[n], "transcript", where);
    const json& segments = member(root[n], "segments", where);
    if (!frames.is_array() || frames.empty() || !frames[0].is_array() || frames[0].empty())
      throw InputError(where + ": frames must be a non-empty array of non-empty arrays");
    const std::size_t f = frames[0].size();
    Sample s;
    s.frames = Matrix(f, frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
      if (!frames[t].is_array() || frames[t].size() != f)
        throw InputError(where + ": frame " + std::to_string(t) + " does not have " +
                         std::to_string(f) + " values");
      for (std::size_t r = 0; r < f; ++r) s.frames(r, t) = as_double(frames[t][r], where);
    }
    if (!transcript.is_array() || transcript.empty())
      throw InputError(where + ": transcript must be a non-empty array");
    for (const json& tok : transcript) {
      if (!tok.is_number_integer() || tok.get<long long>() < 1)
        throw InputError(where + ": transcript tokens must be integers >= 1");
      s.transcript.push_back(tok.get<int>());
    }
    if (!segments.is_array()) throw InputError(where + ": segments must be an array");
    for (const json& seg : segments) {
      if (!seg.is_array() || seg.size() != 2)
        throw InputError(where + ": each segment must be a [start, end] pair");
      s.segments.push_back({as_index(seg[0], where), as_index(seg[1], where)});
    }
    if (s.segments.size() != s.transcript.size())
      throw InputError(where + ": need one segment per transcript token");
    std::size_t cursor = 0;
    for (const Segment& seg : s.segments) {
      if (seg.start != cursor || seg.end <= seg.start)
        throw InputError(where + ": segments must be contiguous, ordered and non-empty");
      cursor = seg.end;
    }
    if (cursor != s.frames.cols()) throw InputError(where + ": segments do not cover every frame");
    data.push_back(std::move(s));
  }
  return data;
}

std::string checkpoint_to_json(const Model& model, const RunConfig& config) {
  const EncoderDims& d = model.dims;
  ordered out;
  out["format"] = kCheckpointFormat;
  out["version"] = kCheckpointVersion;
  out["dims"] = {{"vocab", d.vocab},
                 {"frame_dim", d.frame_dim},
                 {"hidden", d.hidden},
                 {"speech_layers", d.speech_layers},
                 {"text_layers", d.text_layers},
                 {"share_last_layers", d.share_last_layers}};
  out["config"] = run_config_json(config);
  ordered tensors = ordered::object();
  for (std::size_t k = 0; k < model.store.size(); ++k) {
    const Matrix& m = model.store.value(k);
    auto values = m.data();
    tensors[model.store.name(k)] = {{"shape", {m.rows(), m.cols()}},
                                    {"data", std::vector<double>(values.begin(), values.end())}};
  }
  out["tensors"] = std::move(tensors);
  return out.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  const json root = parse_json(text, "checkpoint");
  const std::string where = "checkpoint";
  const json& format = member(root, "format", where);
  if (format != kCheckpointFormat) throw InputError("checkpoint: unrecognized format");
  if (member(root, "version", where) != kCheckpointVersion)
    throw InputError("checkpoint: unsupported version");

  const json& dims_json = member(root, "dims", where);
  EncoderDims dims;
  dims.vocab = as_index(member(dims_json, "vocab", "checkpoint dims"), "checkpoint dims.vocab");
  dims.frame_dim = as_index(member(dims_json, "frame_dim", "checkpoint dims"), "dims.frame_dim");
  dims.hidden = as_index(member(dims_json, "hidden", "checkpoint dims"), "dims.hidden");
  dims.speech_layers =
      as_index(member(dims_json, "speech_layers", "checkpoint dims"), "dims.speech_layers");
  dims.text_layers =
      as_index(member(dims_json, "text_layers", "checkpoint dims"), "dims.text_layers");
  const json& share = member(dims_json, "share_last_layers", "checkpoint dims");
  if (!share.is_boolean()) throw InputError("checkpoint dims.share_last_layers: expected a bool");
  dims.share_last_layers = share.get<bool>();
  try {
    dims.validate();
  } catch (const ContractError& e) {
    throw InputError(std::string("checkpoint dims: ") + e.what());
  }

  Checkpoint ck{init_params(Seed{0}, dims), run_config_from(member(root, "config", where))};
  const json& tensors = member(root, "tensors", where);
  if (!tensors.is_object()) throw InputError("checkpoint: tensors must be an object");
  if (tensors.size() != ck.model.store.size())
    throw InputError("checkpoint: expected " + std::to_string(ck.model.store.size()) +
                     " tensors, found " + std::to_string(tensors.size()));
  for (std::size_t k = 0; k < ck.model.store.size(); ++k) {
    const std::string& name = ck.model.store.name(k);
    const json& t = member(tensors, name.c_str(), "checkpoint tensors");
    Matrix& m = ck.model.store.value(k);
    const json& shape = member(t, "shape", "tensor " + name);
    const json& data = member(t, "data", "tensor " + name);
    if (!shape.is_array() || shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols())
      throw InputError("checkpoint tensor " + name + ": shape does not match dims");
    if (!data.is_array() || data.size() != m.rows() * m.cols())
      throw InputError("checkpoint tensor " + name + ": data length does not match shape");
    auto values = m.data();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = as_double(data[i], "tensor " + name);
  }
  return ck;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

std::string metrics_line(const StepMetrics& m) {
  ordered line;
  line["step"] = m.step ? ordered(*m.step) : ordered();
  line["epoch"] = m.epoch;
  line["ctc_loss"] = m.ctc_loss;
  line["aux_loss"] = m.aux_loss;
  line["total"] = m.total;
  line["lr"] = m.learning_rate;
  line["grad_norm"] = m.grad_norm;
  return line.dump();
}

std::vector<StepMetrics> parse_metrics(const std::string& text) {
  std::vector<StepMetrics> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "metrics line " + std::to_string(number);
    const json obj = parse_json(line, where);
    StepMetrics m;
    const json& step = member(obj, "step", where);
    if (!step.is_null()) m.step = as_index(step, where + " step");
    m.epoch = as_index(member(obj, "epoch", where), where + " epoch");
    m.ctc_loss = as_double(member(obj, "ctc_loss", where), where + " ctc_loss");
    m.aux_loss = as_double(member(obj, "aux_loss", where), where + " aux_loss");
    m.total = as_double(member(obj, "total", where), where + " total");
    m.learning_rate = as_double(member(obj, "lr", where), where + " lr");
    m.grad_norm = as_double(member(obj, "grad_norm", where), where + " grad_norm");
    out.push_back(m);
  }
  return out;
}

Matrix parse_points(const std::string& text) {
  const json root = parse_json(text, "points");
  if (!root.is_array() || root.empty())
    throw InputError("points: expected a non-empty array of points");
  std::vector<std::vector<double>> points;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const std::string where = "points[" + std::to_string(i) + "]";
    if (!root[i].is_array() || root[i].empty()) throw InputError(where + ": expected a number array");
    std::vector<double> p;
    for (const json& x : root[i]) p.push_back(as_double(x, where));
    if (!points.empty() && p.size() != points.front().size())
      throw InputError(where + ": dimension differs from points[0]");
    points.push_back(std::move(p));
  }
  return Matrix::from_columns(points);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace otalign
