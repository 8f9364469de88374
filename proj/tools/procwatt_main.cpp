/*
 * Copyright (c) 2026, the procwatt authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "procwatt/accounting.hpp"
#include "procwatt/model.hpp"
#include "procwatt/regression.hpp"
#include "procwatt/synth.hpp"
#include "procwatt/taxonomy.hpp"
#include "procwatt/trace.hpp"

namespace {

using namespace procwatt;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

bool g_quiet = false;
bool g_verbose = false;

void log_info(const std::string& msg) {
  if (!g_quiet) std::cerr << "procwatt: " << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (g_verbose && !g_quiet) std::cerr << "procwatt: " << msg << '\n';
}

/// Writes through a temp file and renames into place so a failed run
/// never leaves a partial output behind. "-" streams to stdout.
void write_output(const std::string& path,
                  const std::function<void(std::ostream&)>& writer) {
  if (path == "-") {
    writer(std::cout);
    std::cout.flush();
    if (!std::cout) throw IoError("failed to write to standard output");
    return;
  }
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot open output file: " + tmp.string());
    try {
      writer(out);
    } catch (...) {
      out.close();
      fs::remove(tmp);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw IoError("failed while writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move output into place: " + ec.message());
  }
  log_debug("wrote " + path);
}

/// Human summaries go to stdout, unless the data itself is streaming
/// there, in which case they divert to stderr.
std::ostream& summary_stream(const std::string& out_path) {
  return out_path == "-" ? std::cerr : std::cout;
}

Trace load_trace(const std::string& path) {
  if (path == "-") return read_trace(std::cin, TraceFormat::kCsv);
  return read_trace_file(path, trace_format_for_path(path));
}

ModelFile load_model(const std::string& path) {
  if (path == "-") return read_model(std::cin);
  return read_model_file(path);
}

SynthPlan load_plan(const std::string& path) {
  if (path == "-") return read_synth_plan(std::cin);
  return read_synth_plan_file(path);
}

// CLI11 validator accepting either an existing file or the stdin dash.
const CLI::Validator ExistingFileOrDash =
    CLI::Validator(
        [](std::string& path) -> std::string {
          if (path == "-") return {};
          return CLI::ExistingFile(path);
        },
        "FILE(or -)");

/// Fit time for the model metadata; honors SOURCE_DATE_EPOCH so runs
/// can be made byte-reproducible.
std::string fit_timestamp() {
  std::time_t t = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::time(nullptr);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void print_fit_report(std::ostream& out, const FitReport& report) {
  const auto& m = report.model;
  const auto& meta = report.metadata;
  out << "fit report (" << meta.solver << ", "
      << std::string(device_name(m.device)) << ", " << meta.n_samples
      << " samples)\n";
  char line[128];
  std::snprintf(line, sizeof(line), "  %-28s %12.4f W\n", "rmse", meta.rmse);
  out << line;
  std::snprintf(line, sizeof(line), "  %-28s %12.4f %%\n",
                "relative error (midpoint)", meta.relative_error_midpoint);
  out << line;
  std::snprintf(line, sizeof(line), "  %-28s %12.4f W\n", "intercept",
                m.intercept);
  out << line;
  for (auto c : kAllClasses) {
    std::snprintf(line, sizeof(line), "  %-28s %12.4f\n",
                  std::string(class_name(c)).c_str(), m.gamma[class_index(c)]);
    out << line;
  }
  if (meta.ridge_fallback) {
    out << "  note: rank-deficient design, ridge fallback applied\n";
  }
  if (meta.intercept_refit) {
    out << "  note: intercept pinned at 0 (refit)\n";
  }
}

// ---------------------------------------------------------------------------
// subcommands

struct SynthOptions {
  std::string model_path;
  std::string workloads_path;
  std::string out_path = "-";
  std::string format = "auto";
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
  double outlier_fraction = 0.0;
};

int run_synth(const SynthOptions& opt) {
  PowerModel truth = load_model(opt.model_path).model;
  SynthPlan plan = load_plan(opt.workloads_path);
  NoiseSpec noise{opt.noise_sd, opt.seed, opt.outlier_fraction};
  Trace trace = generate_trace(truth, plan, noise);
  TraceFormat format =
      opt.format == "csv"    ? TraceFormat::kCsv
      : opt.format == "json" ? TraceFormat::kJson
                             : (opt.out_path == "-"
                                    ? TraceFormat::kCsv
                                    : trace_format_for_path(opt.out_path));
  write_output(opt.out_path, [&](std::ostream& out) {
    write_trace(out, trace, format);
  });
  log_info("generated " + std::to_string(trace.samples.size()) + " samples");
  return kExitOk;
}

struct FitOptions {
  std::string trace_path;
  std::string device = "auto";
  std::string solver = "auto";
  double holdout = 0.0;
  std::string out_model_path;
};

int run_fit(const FitOptions& opt) {
  Trace trace = load_trace(opt.trace_path);
  if (opt.device != "auto") {
    auto requested = device_from_name(opt.device);
    if (requested && *requested != trace.header.device) {
      throw ValidationError("trace is a " +
                            std::string(device_name(trace.header.device)) +
                            " recording but --device says " + opt.device);
    }
  }
  const DeviceKind device = trace.header.device;
  const std::string solver = opt.solver != "auto" ? opt.solver
                             : device == DeviceKind::kCpu
                                 ? std::string("nnls")
                                 : std::string("ols");

  DesignMatrix full =
      to_design_matrix(trace, device, SigmaAssignment::for_device(device));

  // Deterministic stride holdout: with fraction F, every round(1/F)-th
  // row is evaluated instead of fitted.
  DesignMatrix train = full;
  DesignMatrix held;
  held.device = full.device;
  held.sigma = full.sigma;
  held.n_cores = full.n_cores;
  if (opt.holdout > 0.0) {
    const auto stride = static_cast<std::size_t>(
        std::max<long long>(2, std::llround(1.0 / opt.holdout)));
    train.rows.clear();
    train.targets.clear();
    for (std::size_t i = 0; i < full.rows.size(); ++i) {
      if ((i + 1) % stride == 0) {
        held.rows.push_back(full.rows[i]);
        held.targets.push_back(full.targets[i]);
      } else {
        train.rows.push_back(full.rows[i]);
        train.targets.push_back(full.targets[i]);
      }
    }
    log_debug("holdout: " + std::to_string(held.rows.size()) + " of " +
              std::to_string(full.rows.size()) + " samples");
  }

  FitReport report = solver == "nnls" ? fit_nnls(train) : fit_ols(train);
  report.metadata.timestamp = fit_timestamp();

  std::ostream& summary = summary_stream(opt.out_model_path);
  print_fit_report(summary, report);
  if (!held.rows.empty()) {
    FitMetrics held_metrics = compute_metrics(report.model, held);
    char line[128];
    std::snprintf(line, sizeof(line), "  %-28s %12.4f W (%zu samples)\n",
                  "holdout rmse", held_metrics.rmse, held.rows.size());
    summary << line;
  }

  write_output(opt.out_model_path, [&](std::ostream& out) {
    write_model(out, report.model, report.metadata);
  });
  return kExitOk;
}

struct PredictOptions {
  std::string model_path;
  std::string trace_path;
  std::string out_path = "-";
};

int run_predict(const PredictOptions& opt) {
  ModelFile file = load_model(opt.model_path);
  Trace trace = load_trace(opt.trace_path);
  if (file.model.device != trace.header.device) {
    throw ValidationError("model and trace devices differ");
  }
  DesignMatrix d =
      to_design_matrix(trace, file.model.device, file.model.sigma);
  FitMetrics metrics = compute_metrics(file.model, d);

  write_output(opt.out_path, [&](std::ostream& out) {
    out << "t,measured_w,predicted_w,residual_w\n";
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
      const double predicted = d.targets[i] - metrics.residuals[i];
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n",
                    trace.samples[i].timestamp, d.targets[i], predicted,
                    metrics.residuals[i]);
      out << buf;
    }
  });

  char line[160];
  std::snprintf(line, sizeof(line),
                "rmse %.4f W over %zu samples (%.3f%% of midpoint)\n",
                metrics.rmse, d.rows.size(), metrics.relative_error_midpoint);
  summary_stream(opt.out_path) << line;
  return kExitOk;
}

struct AttributeOptions {
  std::string model_path;
  std::string trace_path;
  std::string format = "text";
  std::string out_path = "-";
};

int run_attribute(const AttributeOptions& opt) {
  ModelFile file = load_model(opt.model_path);
  Trace trace = load_trace(opt.trace_path);
  AttributionReport report = attribute_trace(trace, file.model);
  ReportFormat format = opt.format == "csv"    ? ReportFormat::kCsv
                        : opt.format == "json" ? ReportFormat::kJson
                                               : ReportFormat::kText;
  write_output(opt.out_path, [&](std::ostream& out) {
    render_report(out, report, format);
  });
  return kExitOk;
}

struct ClassifyOptions {
  std::string listing_path;
  std::string device = "cpu";
  std::string rules_path;
  std::string out_path = "-";
};

int run_classify(const ClassifyOptions& opt) {
  DeviceKind device = *device_from_name(opt.device);
  ClassificationRules rules =
      opt.rules_path.empty() ? ClassificationRules::defaults()
                             : ClassificationRules::from_file(opt.rules_path);
  ListingCounts counts;
  if (opt.listing_path == "-") {
    counts = count_listing(std::cin, device, rules);
  } else {
    std::ifstream in(opt.listing_path);
    if (!in) throw IoError("cannot open listing: " + opt.listing_path);
    counts = count_listing(in, device, rules);
  }
  std::uint64_t classified = 0;
  for (auto c : counts.counts) classified += c;
  InstructionHistogram histogram =
      InstructionHistogram::from_counts(counts.counts);

  write_output(opt.out_path, [&](std::ostream& out) {
    out << "{\n";
    out << "  \"format_version\": 1,\n";
    out << "  \"device\": \"" << device_name(device) << "\",\n";
    out << "  \"class_order\": [";
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      out << (i ? ", " : "") << '"' << class_name(kAllClasses[i]) << '"';
    }
    out << "],\n";
    out << "  \"histogram\": [";
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", histogram.probs()[i]);
      out << (i ? ", " : "") << buf;
    }
    out << "],\n";
    out << "  \"classified_count\": " << classified << ",\n";
    out << "  \"unknown_count\": " << counts.unknown << "\n";
    out << "}\n";
  });
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instruction-mix power models and per-process energy "
               "attribution for shared CPU/GPU nodes"};
  app.require_subcommand(1);
  app.fallthrough();  // let -q/-v appear after the subcommand too
  app.add_flag("-q,--quiet", g_quiet, "Suppress log output");
  app.add_flag("-v,--verbose", g_verbose, "Verbose log output");

  SynthOptions synth_opt;
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic trace from a ground-truth model");
  synth->add_option("--model", synth_opt.model_path, "Ground-truth model file")
      ->required()
      ->check(ExistingFileOrDash);
  synth->add_option("--workloads", synth_opt.workloads_path,
                    "Workload plan file (JSON)")
      ->required()
      ->check(ExistingFileOrDash);
  synth->add_option("--noise-sd", synth_opt.noise_sd,
                    "Gaussian noise standard deviation in watts")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", synth_opt.seed, "RNG seed");
  synth->add_option("--outlier-fraction", synth_opt.outlier_fraction,
                    "Fraction of noise draws contaminated at 10x sd")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--out", synth_opt.out_path, "Output trace file or '-'")
      ->required();
  synth->add_option("--format", synth_opt.format, "Trace format")
      ->check(CLI::IsMember({"auto", "csv", "json"}));

  FitOptions fit_opt;
  auto* fit =
      app.add_subcommand("fit", "Fit a power model to a recorded trace");
  fit->add_option("--trace", fit_opt.trace_path, "Input trace file or '-'")
      ->required();
  fit->add_option("--device", fit_opt.device,
                  "Expected device; errors if the trace disagrees")
      ->check(CLI::IsMember({"auto", "cpu", "gpu"}));
  fit->add_option("--solver", fit_opt.solver,
                  "Solver (default: nnls for cpu, ols for gpu)")
      ->check(CLI::IsMember({"auto", "nnls", "ols"}));
  fit->add_option("--holdout", fit_opt.holdout,
                  "Fraction of samples held out for evaluation")
      ->check(CLI::Range(0.0, 0.5));
  fit->add_option("--out-model", fit_opt.out_model_path,
                  "Output model file or '-'")
      ->required();

  PredictOptions predict_opt;
  auto* predict = app.add_subcommand(
      "predict", "Emit predicted-vs-measured power for a trace");
  predict->add_option("--model", predict_opt.model_path, "Model file or '-'")
      ->required()
      ->check(ExistingFileOrDash);
  predict->add_option("--trace", predict_opt.trace_path,
                      "Input trace file or '-'")
      ->required();
  predict->add_option("--out", predict_opt.out_path, "Output CSV or '-'");

  AttributeOptions attribute_opt;
  auto* attribute = app.add_subcommand(
      "attribute", "Attribute per-process power and energy over a trace");
  attribute->add_option("--model", attribute_opt.model_path,
                        "Model file or '-'")
      ->required()
      ->check(ExistingFileOrDash);
  attribute->add_option("--trace", attribute_opt.trace_path,
                        "Input trace file or '-'")
      ->required();
  attribute->add_option("--format", attribute_opt.format, "Report format")
      ->check(CLI::IsMember({"text", "csv", "json"}));
  attribute->add_option("--out", attribute_opt.out_path, "Output file or '-'");

  ClassifyOptions classify_opt;
  auto* classify = app.add_subcommand(
      "classify",
      "Build an instruction histogram from a disassembly listing");
  classify->add_option("--listing", classify_opt.listing_path,
                       "Disassembly listing file or '-'")
      ->required();
  classify->add_option("--device", classify_opt.device, "Device table")
      ->check(CLI::IsMember({"cpu", "gpu"}));
  classify->add_option("--rules", classify_opt.rules_path,
                       "Override classification rules file");
  classify->add_option("--out", classify_opt.out_path,
                       "Output JSON file or '-'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return run_synth(synth_opt);
    if (fit->parsed()) return run_fit(fit_opt);
    if (predict->parsed()) return run_predict(predict_opt);
    if (attribute->parsed()) return run_attribute(attribute_opt);
    if (classify->parsed()) return run_classify(classify_opt);
  } catch (const NumericalError& e) {
    std::cerr << "procwatt: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "procwatt: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "procwatt: unexpected error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
