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

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "otalign/ctc.hpp"
#include "otalign/errors.hpp"
#include "otalign/gradcheck.hpp"
#include "otalign/io.hpp"
#include "otalign/ot.hpp"
#include "otalign/seqdist.hpp"

namespace otalign::cli {

namespace {

namespace fs = std::filesystem;
using ordered = nlohmann::ordered_json;

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig{} : parse_run_config(read_file(path));
}

Dataset load_dataset(const std::string& path) {
  Dataset data = parse_dataset(read_file(path));
  if (data.empty()) throw InputError(path + ": dataset is empty");
  return data;
}

std::string format(const char* fmt, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}

// --- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  std::string config;
  std::string out;
};

int gen_data(const GenDataArgs& a, std::ostream& out) {
  const RunConfig cfg = load_config(a.config);
  const Dataset data = generate(cfg.synth);
  write_file_atomic(a.out, dataset_to_json(data));
  out << "wrote " << data.size() << " samples (seed " << cfg.synth.seed << ") to " << a.out
      << "\n";
  return kOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out_dir;
};

int train_cmd(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(a.config);
  const Dataset data = load_dataset(a.data);
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  write_file_atomic(dir / "config.resolved.json", run_config_to_json(cfg));

  Model model = build_model(cfg.train, cfg.synth.vocab, cfg.synth.frame_dim);
  std::string metrics;
  std::size_t steps = 0;
  auto sink = [&](const StepMetrics& m) {
    metrics += metrics_line(m) + "\n";
    if (m.step) steps = *m.step;
  };
  TrainResult result;
  try {
    result = train_model(std::move(model), data, cfg.train, sink);
  } catch (const DivergenceError& e) {
    write_file_atomic(dir / "metrics.jsonl", metrics);
    err << "error: " << e.what() << "; last finite step " << e.step() - 1 << "\n";
    return kDiverged;
  }
  write_file_atomic(dir / "metrics.jsonl", metrics);
  write_file_atomic(dir / "checkpoint.json", checkpoint_to_json(result.model, cfg));
  out << "trained " << steps << " steps over " << cfg.train.epochs << " epochs; wrote "
      << (dir / "checkpoint.json").string() << "\n";
  return kOk;
}

// --- eval / decode ----------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
};

int eval_cmd(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.data);
  const EvalReport r = evaluate(ck.model, data, ck.config.train);
  ordered report;
  report["wer"] = r.wer;
  report["mean_wasserstein"] = r.mean_wasserstein;
  report["diagonal_mass"] = r.diagonal_mass;
  out << report.dump() << "\n";
  return kOk;
}

int decode_cmd(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.data);
  check_compatible(ck.model, data);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const SpeechOutput speech = speech_forward(ck.model, data[n].frames);
    ordered line;
    line["index"] = n;
    line["reference"] = data[n].transcript;
    line["hypothesis"] = greedy_decode(log_softmax_rows(speech.logits));
    out << line.dump() << "\n";
  }
  return kOk;
}

// --- loss -------------------------------------------------------------------

struct LossArgs {
  std::string kind = "ot";
  std::string u_file;
  std::string v_file;
  double p = 2.0;
  double gamma = 1.0;
  double lambda = 1.0;
  bool no_debias = false;
  std::string length_match = "interpolate";
  double smoothing = 1.0;
};

int loss_cmd(const LossArgs& a, std::ostream& out) {
  const Matrix u = parse_points(read_file(a.u_file));
  const Matrix v = parse_points(read_file(a.v_file));
  if (u.rows() != v.rows())
    throw InputError("point dimensions differ: " + std::to_string(u.rows()) + " vs " +
                     std::to_string(v.rows()));
  ordered report;
  if (a.kind == "ot") {
    OtConfig cfg;
    cfg.p = a.p;
    cfg.gamma = a.gamma;
    cfg.lambda = a.lambda;
    cfg.debias = !a.no_debias;
    const WassersteinResult r = wasserstein_loss(u, v, cfg);
    report["value"] = r.value;
    report["grad_norms"] = {{"u", r.grad_u.norm()}, {"v", r.grad_v.norm()}};
    report["transport_cost"] = r.plan.transport_cost;
    report["converged"] = r.converged;
  } else if (a.kind == "softdtw") {
    const LossResult r = soft_dtw(u, v, a.smoothing, a.p);
    report["value"] = r.value;
    report["grad_norms"] = {{"u", r.grad_u.norm()}, {"v", r.grad_v.norm()}};
  } else {
    const auto match = parse_length_match(a.length_match);
    if (!match) throw InputError("unknown length matcher '" + a.length_match + "'");
    const MatchedPair pair = match_lengths(*match, u, v);
    const LossResult r = a.kind == "kl" ? kl_loss(pair) : euclidean_loss(pair);
    const auto [gu, gv] = match_lengths_backward(*match, u, v, r.grad_u, r.grad_v);
    report["value"] = r.value;
    report["grad_norms"] = {{"u", gu.norm()}, {"v", gv.norm()}};
  }
  out << report.dump() << "\n";
  return kOk;
}

// --- gradcheck --------------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 1;
  std::string module;
  bool corrupt = false;
};

int gradcheck_cmd(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  GradcheckOptions options;
  options.seed = a.seed;
  if (!a.module.empty()) options.module = a.module;
  options.corrupt = a.corrupt;
  const std::vector<GradcheckRow> rows = run_gradchecks(options);
  char line[160];
  std::snprintf(line, sizeof line, "%-9s %-34s %13s %9s %6s  %s\n", "module", "op",
                "max_rel_error", "tolerance", "probes", "status");
  out << line;
  std::vector<std::string> failing;
  for (const GradcheckRow& r : rows) {
    std::snprintf(line, sizeof line, "%-9s %-34s %13.3e %9.0e %6zu  %s\n", r.module.c_str(),
                  r.op.c_str(), r.max_rel_error, r.tolerance, r.probes, r.passed ? "PASS" : "FAIL");
    out << line;
    if (!r.passed) failing.push_back(r.module + "/" + r.op);
  }
  if (failing.empty()) return kOk;
  err << "gradcheck failed:";
  for (const std::string& f : failing) err << " " << f;
  err << "\n";
  return kCheckFailed;
}

// --- plot -------------------------------------------------------------------

struct PlotArgs {
  std::string metrics;
  std::string out;
};

int plot_cmd(const PlotArgs& a, std::ostream& out) {
  const std::vector<StepMetrics> metrics = parse_metrics(read_file(a.metrics));
  if (metrics.empty()) throw InputError(a.metrics + ": no metrics records");
  write_file_atomic(a.out, render_svg(metrics));
  out << "plotted " << metrics.size() << " records to " << a.out << "\n";
  return kOk;
}

std::string config_help() {
  return "\nConfig file (JSON). Every key is optional; defaults:\n" +
         run_config_to_json(RunConfig{});
}

}  // namespace

std::string render_svg(const std::vector<StepMetrics>& metrics) {
  constexpr double kWidth = 720, kHeight = 420;
  constexpr double kLeft = 80, kRight = 150, kTop = 30, kBottom = 60;
  struct Series {
    const char* name;
    const char* color;
    double StepMetrics::*field;
  };
  const Series series[] = {{"ctc_loss", "#1f77b4", &StepMetrics::ctc_loss},
                           {"aux_loss", "#ff7f0e", &StepMetrics::aux_loss},
                           {"total", "#2ca02c", &StepMetrics::total}};
  double lo = INFINITY, hi = -INFINITY;
  for (const StepMetrics& m : metrics)
    for (const Series& s : series) {
      lo = std::min(lo, m.*s.field);
      hi = std::max(hi, m.*s.field);
    }
  if (!(hi > lo)) {
    hi = lo + 1.0;
    lo -= 1.0;
  }
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const std::size_t n = metrics.size();
  auto x_of = [&](std::size_t i) {
    return kLeft + (n > 1 ? plot_w * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
  };
  auto y_of = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };

  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"420\" "
         "viewBox=\"0 0 720 420\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"720\" height=\"420\" fill=\"white\"/>\n";
  svg += "<g stroke=\"black\" stroke-width=\"1\">\n";
  svg += "<line x1=\"80\" y1=\"360\" x2=\"570\" y2=\"360\"/>\n";
  svg += "<line x1=\"80\" y1=\"30\" x2=\"80\" y2=\"360\"/>\n</g>\n";
  svg += "<text x=\"325\" y=\"400\" text-anchor=\"middle\">record (steps and epoch summaries)</text>\n";
  svg += "<text x=\"20\" y=\"195\" text-anchor=\"middle\" transform=\"rotate(-90 20 195)\">loss</text>\n";
  svg += "<text x=\"74\" y=\"" + format("%.2f", y_of(hi) + 4) + "\" text-anchor=\"end\">" +
         format("%.4g", hi) + "</text>\n";
  svg += "<text x=\"74\" y=\"" + format("%.2f", y_of(lo) + 4) + "\" text-anchor=\"end\">" +
         format("%.4g", lo) + "</text>\n";
  svg += "<text x=\"80\" y=\"376\" text-anchor=\"middle\">1</text>\n";
  svg += "<text x=\"570\" y=\"376\" text-anchor=\"middle\">" + std::to_string(n) + "</text>\n";
  double legend_y = 50;
  for (const Series& s : series) {
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(s.color) +
           "\" stroke-width=\"1.5\" data-metric=\"" + s.name + "\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      if (i) svg += ' ';
      svg += format("%.2f", x_of(i)) + "," + format("%.2f", y_of(metrics[i].*s.field));
    }
    svg += "\"/>\n";
    svg += "<line x1=\"585\" y1=\"" + format("%.0f", legend_y) + "\" x2=\"605\" y2=\"" +
           format("%.0f", legend_y) + "\" stroke=\"" + s.color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"612\" y=\"" + format("%.0f", legend_y + 4) + "\">" + s.name + "</text>\n";
    legend_y += 20;
  }
  svg += "</svg>\n";
  return svg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sequence alignment losses (CTC, entropic OT, soft-DTW, ...) and a siamese "
               "speech/text encoder trainer on synthetic data."};
  app.name("otalign");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--config", gen.config, "Run config JSON (synth section is used)");
  gen_cmd->add_option("--out", gen.out, "Dataset JSON to write")->required();
  gen_cmd->footer(config_help());

  TrainArgs tr;
  auto* train_sub = app.add_subcommand("train", "Train the speech/text encoders");
  train_sub->add_option("--config", tr.config, "Run config JSON (train, ot, model, synth.vocab)");
  train_sub->add_option("--data", tr.data, "Dataset JSON")->required();
  train_sub->add_option("--out-dir", tr.out_dir,
                        "Directory for checkpoint.json, metrics.jsonl, config.resolved.json")
      ->required();
  train_sub->footer(config_help());

  EvalArgs ev;
  auto* eval_sub = app.add_subcommand("eval", "Print {wer, mean_wasserstein, diagonal_mass}");
  eval_sub->add_option("--checkpoint", ev.checkpoint, "Checkpoint JSON")->required();
  eval_sub->add_option("--data", ev.data, "Dataset JSON")->required();

  EvalArgs dec;
  auto* decode_sub = app.add_subcommand("decode", "Greedy CTC decode, one JSON line per sample");
  decode_sub->add_option("--checkpoint", dec.checkpoint, "Checkpoint JSON")->required();
  decode_sub->add_option("--data", dec.data, "Dataset JSON")->required();

  LossArgs ls;
  auto* loss_sub = app.add_subcommand("loss", "Evaluate one distance between two point sequences");
  loss_sub->add_option("--kind", ls.kind, "ot, euclidean, kl or softdtw")
      ->check(CLI::IsMember({"ot", "euclidean", "kl", "softdtw"}))
      ->capture_default_str();
  loss_sub->add_option("--u-file", ls.u_file, "JSON array of points")->required();
  loss_sub->add_option("--v-file", ls.v_file, "JSON array of points")->required();
  loss_sub->add_option("--p", ls.p, "Order of the ground cost norm")->capture_default_str();
  loss_sub->add_option("--gamma", ls.gamma, "Positional weight (ot)")->capture_default_str();
  loss_sub->add_option("--lambda", ls.lambda, "Entropic weight (ot)")->capture_default_str();
  loss_sub->add_flag("--no-debias", ls.no_debias, "Plain W instead of the debiased divergence");
  loss_sub->add_option("--length-match", ls.length_match,
                       "average, interpolate or attention (euclidean, kl)")
      ->capture_default_str();
  loss_sub->add_option("--smoothing", ls.smoothing, "Soft-DTW smoothing")->capture_default_str();

  GradcheckArgs gc;
  auto* gc_sub = app.add_subcommand("gradcheck", "Finite-difference checks of every backward pass");
  gc_sub->add_option("--seed", gc.seed, "Seed for the random probes")->capture_default_str();
  gc_sub->add_option("--module", gc.module, "Run one module: ctc, ot, seqdist, encoder, siamese");
  gc_sub->add_flag("--corrupt", gc.corrupt, "Scale analytic gradients by 1.1 (harness self-test)")
      ->group("");

  PlotArgs pl;
  auto* plot_sub = app.add_subcommand("plot", "Render metrics.jsonl as an SVG line chart");
  plot_sub->add_option("--metrics", pl.metrics, "metrics.jsonl")->required();
  plot_sub->add_option("--out", pl.out, "SVG to write")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (gen_cmd->parsed()) return gen_data(gen, out);
    if (train_sub->parsed()) return train_cmd(tr, out, err);
    if (eval_sub->parsed()) return eval_cmd(ev, out);
    if (decode_sub->parsed()) return decode_cmd(dec, out);
    if (loss_sub->parsed()) return loss_cmd(ls, out);
    if (gc_sub->parsed()) return gradcheck_cmd(gc, out, err);
    if (plot_sub->parsed()) return plot_cmd(pl, out);
  } catch (const IncompatibleError& e) {
    err << "error: " << e.what() << "\n";
    return kIncompatible;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const Error& e) {
    // Input, contract, feasibility and size-limit errors all trace back to
    // what the user passed in.
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace otalign::cli
