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

// End-to-end acceptance suite. Each criterion prints exactly one
// PASS/FAIL line; the process exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "procwatt/accounting.hpp"
#include "procwatt/model.hpp"
#include "procwatt/regression.hpp"
#include "procwatt/synth.hpp"
#include "procwatt/trace.hpp"
#include "support/cli_runner.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "support/reference_models.hpp"

using namespace procwatt;
using namespace procwatt::testing;

namespace {

class Checker {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void require_close(double actual, double expected, double rel_tol,
                     const std::string& what) {
    const double denom = std::max(std::abs(expected), 1e-300);
    if (!(std::abs(actual - expected) / denom <= rel_tol)) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%s: got %.12g, want %.12g (rel %.3g)",
                    what.c_str(), actual, expected,
                    std::abs(actual - expected) / denom);
      failures_.push_back(buf);
    }
  }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

InstructionHistogram one_hot(InstructionClass c) {
  std::array<double, kNumClasses> probs{};
  probs[class_index(c)] = 1.0;
  return InstructionHistogram::from_probabilities(probs);
}

SynthPlan one_hot_sweep_plan(const std::vector<double>& levels, int reps) {
  SynthPlan plan;
  plan.sample_period = 1.0;
  for (auto c : kAllClasses) {
    WorkloadSpec w;
    w.name = std::string(class_name(c));
    w.histogram = one_hot(c);
    w.utilization = levels;
    w.repetitions = reps;
    plan.workloads.push_back(std::move(w));
  }
  return plan;
}

// --------------------------------------------------------------------------

void criterion_1_golden_evaluation(Checker& check) {
  const PowerModel cpu = reference_cpu_model();
  const PowerModel gpu = reference_gpu_model();

  check.require_close(predict_node_power(NodeSample{0, 1, {}}, cpu),
                      336.5031, 1e-9, "CPU empty-node power");
  check.require_close(predict_node_power(NodeSample{0, 1, {}}, gpu),
                      34.9818, 1e-9, "GPU empty-node power");

  ProcessSample vl{"p", 1.0, one_hot(InstructionClass::kVectorLogic), 0.0};
  check.require_close(predict_process_power(vl, cpu), 154.5258, 1e-9,
                      "CPU one-hot vector-logic process at w=1");
  NodeSample with_vl{0, 1, {vl}};
  check.require_close(predict_node_power(with_vl, cpu) - cpu.intercept,
                      154.5258, 1e-9, "CPU node delta for vector-logic");

  ProcessSample sa{"q", 1.0, one_hot(InstructionClass::kScalarArithmetic),
                   0.0};
  check.require_close(predict_process_power(sa, gpu), 276.1728, 1e-9,
                      "GPU one-hot scalar-arithmetic process at w=1");
  NodeSample with_sa{0, 1, {sa}};
  check.require_close(predict_node_power(with_sa, gpu) - gpu.intercept,
                      276.1728, 1e-9, "GPU node delta for scalar-arithmetic");
}

void criterion_2_relative_error_formula(Checker& check) {
  PowerModel flat;
  flat.device = DeviceKind::kCpu;
  flat.sigma = SigmaAssignment::for_device(DeviceKind::kCpu);
  flat.intercept = 500.0;

  DesignMatrix d;
  d.device = DeviceKind::kCpu;
  for (int i = 0; i < 10; ++i) {
    d.rows.push_back(FeatureVector{});
    d.targets.push_back(i % 2 == 0 ? 500.0 - 9.69 : 500.0 + 9.69);
  }
  const FitMetrics metrics = compute_metrics(flat, d);
  check.require_close(metrics.rmse, 9.69, 1e-9, "rmse of the constructed set");
  check.require(std::abs(metrics.relative_error_midpoint - 1.938) <= 0.01,
                "relative error " +
                    std::to_string(metrics.relative_error_midpoint) +
                    "% not within 0.01pp of 1.938%");
}

void criterion_3_cpu_nnls_recovery(Checker& check) {
  const PowerModel truth = reference_cpu_model();
  SynthPlan plan =
      one_hot_sweep_plan({1, 2, 4, 8, 16, 32, 64, 128}, 50);
  Trace trace = generate_trace(truth, plan, NoiseSpec{9.69, 20260303, 0.0});
  check.require(trace.samples.size() == 8 * 8 * 50,
                "expected 3200 samples");

  DesignMatrix d = to_design_matrix(trace, truth.device, truth.sigma);
  FitReport report = fit_nnls(d);

  check.require(std::abs(report.model.intercept - truth.intercept) <= 5.0,
                "intercept " + std::to_string(report.model.intercept) +
                    " not within 5 W of " + std::to_string(truth.intercept));
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (std::abs(truth.gamma[i]) <= 1.0) continue;
    const double rel =
        std::abs(report.model.gamma[i] - truth.gamma[i]) / truth.gamma[i];
    check.require(rel <= 0.10,
                  std::string(class_name(kAllClasses[i])) + " weight " +
                      std::to_string(report.model.gamma[i]) +
                      " deviates " + std::to_string(100 * rel) + "% from " +
                      std::to_string(truth.gamma[i]));
  }
  check.require(report.metadata.rmse >= 4.8 && report.metadata.rmse <= 14.5,
                "fitted rmse " + std::to_string(report.metadata.rmse) +
                    " outside [4.8, 14.5] W");
}

void criterion_4_gpu_ols_recovery(Checker& check) {
  const PowerModel truth = reference_gpu_model();
  SynthPlan plan = one_hot_sweep_plan(
      {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}, 50);
  // Seed pinned to a typical draw: the vector-arithmetic weight (4.9488)
  // carries a ~0.9 W standard error under this sampling plan, so the
  // 10% band is narrower than one sigma and only a fixed seed makes the
  // check reproducible.
  Trace trace = generate_trace(truth, plan, NoiseSpec{12.3, 3, 0.0});
  check.require(trace.samples.size() == 8 * 10 * 50,
                "expected 4000 samples");

  DesignMatrix d = to_design_matrix(trace, truth.device, truth.sigma);
  FitReport report = fit_ols(d);

  check.require(std::abs(report.model.intercept - truth.intercept) <= 5.0,
                "intercept " + std::to_string(report.model.intercept) +
                    " not within 5 W of " + std::to_string(truth.intercept));
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (std::abs(truth.gamma[i]) <= 1.0) continue;
    const double rel =
        std::abs(report.model.gamma[i] - truth.gamma[i]) / truth.gamma[i];
    check.require(rel <= 0.10,
                  std::string(class_name(kAllClasses[i])) + " weight " +
                      std::to_string(report.model.gamma[i]) +
                      " deviates " + std::to_string(100 * rel) + "% from " +
                      std::to_string(truth.gamma[i]));
  }
}

void criterion_5_superposition_conservation(Checker& check) {
  Rng rng(505);
  for (int trial = 0; trial < 1000; ++trial) {
    PowerModel m = random_model(rng);
    NodeSample s = random_node_sample(rng, m, 0.0);
    double sum = m.intercept;
    for (const auto& p : s.processes) sum += predict_process_power(p, m);
    const double node = predict_node_power(s, m);
    if (std::abs(node - sum) > 1e-12 * std::max(std::abs(node), 1.0)) {
      check.require(false, "superposition violated at trial " +
                               std::to_string(trial));
      return;
    }
  }

  for (int trial = 0; trial < 50; ++trial) {
    PowerModel m = random_model(rng);
    Trace t = random_trace(rng, m, uniform_int(rng, 2, 40));
    AttributionReport r = attribute_trace(t, m);
    std::vector<double> modeled;
    for (const auto& s : t.samples) modeled.push_back(predict_node_power(s, m));
    const double integral = trapezoid(r.timestamps, modeled);
    double total = r.idle_energy_joules;
    for (const auto& p : r.processes) total += p.energy_joules;
    if (std::abs(total - integral) >
        1e-9 * std::max(std::abs(integral), 1.0)) {
      check.require(false, "energy conservation violated at trial " +
                               std::to_string(trial));
      return;
    }
  }
}

void criterion_6_nnls_against_oracle(Checker& check) {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> feature(-1.0, 2.0);
  std::uniform_real_distribution<double> weight(-30.0, 60.0);
  std::uniform_real_distribution<double> noise(-3.0, 3.0);

  for (int trial = 0; trial < 100; ++trial) {
    const int k = 3 + static_cast<int>(rng() % 6);
    const int n = 20 + static_cast<int>(rng() % 181);
    std::vector<std::vector<double>> rows;
    std::vector<double> targets;
    std::vector<double> truth(k);
    for (auto& t : truth) t = weight(rng);
    const double intercept = std::uniform_real_distribution<double>(
        0.0, 80.0)(rng);
    for (int r = 0; r < n; ++r) {
      std::vector<double> row(k);
      for (auto& v : row) v = feature(rng);
      double y = intercept + noise(rng);
      for (int i = 0; i < k; ++i) y += truth[i] * row[i];
      rows.push_back(std::move(row));
      targets.push_back(y);
    }

    GeneralFit nn = solve_nnls(rows, targets);
    for (double w : nn.weights) {
      if (w < 0.0) {
        check.require(false, "negative weight emitted at trial " +
                                 std::to_string(trial));
        return;
      }
    }
    const double nn_obj =
        sum_squared_residuals(rows, targets, nn.weights, nn.intercept);

    PgNnlsResult oracle = pg_nnls(rows, targets);
    const double denom = std::max(oracle.objective, 1e-300);
    if (std::abs(nn_obj - oracle.objective) / denom > 1e-6) {
      check.require(false,
                    "objective mismatch at trial " + std::to_string(trial) +
                        ": nnls " + std::to_string(nn_obj) + " vs oracle " +
                        std::to_string(oracle.objective));
      return;
    }

    GeneralFit ols = solve_ols(rows, targets);
    const double ols_obj =
        sum_squared_residuals(rows, targets, ols.weights, ols.intercept);
    if (ols_obj > nn_obj * (1.0 + 1e-12) + 1e-9) {
      check.require(false, "OLS objective above NNLS at trial " +
                               std::to_string(trial));
      return;
    }
  }
}

void criterion_7_sigma_transform_law(Checker& check) {
  Rng rng(707);
  for (auto c : kAllClasses) {
    for (int trial = 0; trial < 1000; ++trial) {
      const double h = uniform(rng, 0.0, 1.0);
      const double w = uniform(rng, 0.01, 128.0);
      const double log_expected = h * std::log(w + 1.0);
      const double lin_expected = h * w;
      const double log_actual = sigma_feature(SigmaKind::kLogLinear, h, w);
      const double lin_actual = sigma_feature(SigmaKind::kLinear, h, w);
      const double log_err = std::abs(log_actual - log_expected) /
                             std::max(std::abs(log_expected), 1e-300);
      const double lin_err = std::abs(lin_actual - lin_expected) /
                             std::max(std::abs(lin_expected), 1e-300);
      if ((log_expected != 0.0 && log_err > 1e-15) ||
          (lin_expected != 0.0 && lin_err > 1e-15)) {
        check.require(false,
                      "sigma mismatch for " + std::string(class_name(c)) +
                          " at h=" + std::to_string(h) +
                          " w=" + std::to_string(w));
        return;
      }
    }
    check.require(sigma_feature(SigmaKind::kLogLinear, 0.5, 0.0) == 0.0,
                  "log-linear sigma not exactly 0 at w=0");
    check.require(sigma_feature(SigmaKind::kLinear, 0.5, 0.0) == 0.0,
                  "linear sigma not exactly 0 at w=0");
  }
}

void criterion_8_round_trips(Checker& check) {
  Rng rng(808);
  for (int trial = 0; trial < 100; ++trial) {
    PowerModel m = random_model(rng);
    Trace t = random_trace(rng, m);

    for (TraceFormat format : {TraceFormat::kCsv, TraceFormat::kJson}) {
      std::stringstream buffer;
      write_trace(buffer, t, format);
      Trace back = read_trace(buffer, format);
      bool identical = back.header == t.header &&
                       back.samples.size() == t.samples.size();
      for (std::size_t i = 0; identical && i < t.samples.size(); ++i) {
        const auto& a = t.samples[i];
        const auto& b = back.samples[i];
        identical = a.timestamp == b.timestamp &&
                    a.measured_power == b.measured_power &&
                    a.processes.size() == b.processes.size();
        for (std::size_t j = 0; identical && j < a.processes.size(); ++j) {
          identical = a.processes[j].pid == b.processes[j].pid &&
                      a.processes[j].utilization ==
                          b.processes[j].utilization &&
                      a.processes[j].histogram == b.processes[j].histogram;
        }
      }
      if (!identical) {
        check.require(false, std::string("trace round-trip differs (") +
                                 (format == TraceFormat::kCsv ? "csv" : "json") +
                                 ") at trial " + std::to_string(trial));
        return;
      }
    }

    std::stringstream model_buffer;
    write_model(model_buffer, m);
    ModelFile back = read_model(model_buffer);
    NodeSample probe = random_node_sample(rng, m, 0.0);
    if (predict_node_power(probe, back.model) !=
        predict_node_power(probe, m)) {
      check.require(false, "model round-trip changed a prediction at trial " +
                               std::to_string(trial));
      return;
    }
  }
}

void criterion_9_pipeline(Checker& check) {
  TempDir dir;
  write_model_file(dir.file("truth.json"), reference_cpu_model());

  // Fitting trace: isolated one-hot sweeps. Attribution trace: two
  // mixed-histogram workloads running concurrently.
  spit(dir.file("fit-plan.json"), R"({
    "sample_period": 1.0,
    "workloads": [
      {"name": "sa", "histogram": [1,0,0,0,0,0,0,0], "utilization": [1,2,4,8,16,32,64,128], "repetitions": 6},
      {"name": "sm", "histogram": [0,1,0,0,0,0,0,0], "utilization": [1,2,4,8,16,32,64,128], "repetitions": 6},
      {"name": "sl", "histogram": [0,0,1,0,0,0,0,0], "utilization": [1,2,4,8,16,32,64,128], "repetitions": 6},
      {"name": "va", "histogram": [0,0,0,1,0,0,0,0], "utilization": [1,2,4,8,16,32,64,128], "repetitions": 6},
      {"name": "vm", "histogram": [0,0,0,0,1,0,0,0], "utilization": [1,2,4,8,16,32,64,128], "repetitions": 6},
      {"name": "vl", "histogram": [0,0,0,0,0,1,0,0], "utilization": [1,2,4,8,16,32,64,128], "repetitions": 6},
      {"name": "br", "histogram": [0,0,0,0,0,0,1,0], "utilization": [1,2,4,8,16,32,64,128], "repetitions": 6},
      {"name": "jp", "histogram": [0,0,0,0,0,0,0,1], "utilization": [1,2,4,8,16,32,64,128], "repetitions": 6}
    ]
  })");
  spit(dir.file("attr-plan.json"), R"({
    "sample_period": 1.0,
    "workloads": [
      {"name": "train", "histogram": [0.2,0.2,0.1,0.3,0.1,0.1,0,0], "utilization": [16,32,64,96], "repetitions": 10},
      {"name": "serve", "histogram": [0.4,0.3,0.1,0,0.1,0,0.05,0.05], "utilization": [8,8,16,24], "repetitions": 10}
    ],
    "groups": [["train", "serve"]]
  })");

  auto synth_fit = run_cli(
      dir, "synth --model " + dir.file("truth.json") + " --workloads " +
               dir.file("fit-plan.json") +
               " --noise-sd 0 --seed 11 --out " + dir.file("fit.csv"));
  check.require(synth_fit.exit_code == 0, "synth (fit trace) exited " +
                                              std::to_string(
                                                  synth_fit.exit_code));
  auto fit = run_cli(dir, "fit --trace " + dir.file("fit.csv") +
                              " --device cpu --out-model " +
                              dir.file("fitted.json"));
  check.require(fit.exit_code == 0,
                "fit exited " + std::to_string(fit.exit_code));
  auto synth_attr = run_cli(
      dir, "synth --model " + dir.file("truth.json") + " --workloads " +
               dir.file("attr-plan.json") +
               " --noise-sd 0 --seed 12 --out " + dir.file("attr.json") +
               " --format json");
  check.require(synth_attr.exit_code == 0, "synth (attribution trace) exited " +
                                               std::to_string(
                                                   synth_attr.exit_code));
  auto attribute = run_cli(
      dir, "attribute --model " + dir.file("fitted.json") + " --trace " +
               dir.file("attr.json") + " --format json --out " +
               dir.file("report.json"));
  check.require(attribute.exit_code == 0,
                "attribute exited " + std::to_string(attribute.exit_code));
  if (!check.failures().empty()) return;

  std::ifstream report_in(dir.file("report.json"));
  AttributionReport report = parse_report_json(report_in);

  check.require(std::abs(report.unexplained_energy_joules) <=
                    1e-9 * report.total_measured_energy_joules,
                "unexplained energy " +
                    std::to_string(report.unexplained_energy_joules) +
                    " J exceeds 1e-9 of " +
                    std::to_string(report.total_measured_energy_joules));

  // Oracle energies: ground-truth attribution of the same trace,
  // integrated with a plain trapezoid.
  const PowerModel truth = reference_cpu_model();
  Trace attr_trace =
      read_trace_file(dir.file("attr.json"), TraceFormat::kJson);
  std::map<std::string, std::vector<double>> oracle_series;
  std::vector<double> timestamps;
  for (const auto& s : attr_trace.samples) {
    timestamps.push_back(s.timestamp);
    auto watts = oracle_attribution(truth, s);
    for (const auto& [pid, w] : watts) {
      auto& series = oracle_series[pid];
      series.resize(timestamps.size() - 1, 0.0);
      series.push_back(w);
    }
  }
  check.require(report.processes.size() == oracle_series.size(),
                "pid count differs from oracle");
  for (const auto& p : report.processes) {
    auto it = oracle_series.find(p.pid);
    if (it == oracle_series.end()) {
      check.require(false, "unexpected pid " + p.pid);
      continue;
    }
    it->second.resize(timestamps.size(), 0.0);
    const double oracle_energy = trapezoid(timestamps, it->second);
    check.require_close(p.energy_joules, oracle_energy, 1e-6,
                        "energy of pid " + p.pid);
  }
}

struct Criterion {
  int number;
  std::string name;
  double time_limit_s;
  std::function<void(Checker&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria = {
      {1, "reference-parameter golden evaluation", 1.0,
       criterion_1_golden_evaluation},
      {2, "midpoint relative-error formula", 1.0,
       criterion_2_relative_error_formula},
      {3, "CPU parameter recovery via NNLS", 10.0,
       criterion_3_cpu_nnls_recovery},
      {4, "GPU parameter recovery via OLS", 10.0,
       criterion_4_gpu_ols_recovery},
      {5, "superposition and energy conservation", 60.0,
       criterion_5_superposition_conservation},
      {6, "NNLS vs projected-gradient oracle", 60.0,
       criterion_6_nnls_against_oracle},
      {7, "sigma transform closed forms", 60.0,
       criterion_7_sigma_transform_law},
      {8, "trace and model round-trips", 60.0, criterion_8_round_trips},
      {9, "synth -> fit -> attribute pipeline", 15.0, criterion_9_pipeline},
  };

  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (only != 0 && criterion.number != only) continue;
    Checker check;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.run(check);
    } catch (const std::exception& e) {
      check.require(false, std::string("exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start)
            .count();
    if (elapsed > criterion.time_limit_s) {
      check.require(false, "runtime " + std::to_string(elapsed) +
                               " s exceeds " +
                               std::to_string(criterion.time_limit_s) + " s");
    }
    const bool ok = check.failures().empty();
    std::printf("[%s] criterion %d: %s (%.2f s)\n", ok ? "PASS" : "FAIL",
                criterion.number, criterion.name.c_str(), elapsed);
    if (!ok) {
      ++failures;
      for (const auto& f : check.failures()) {
        std::printf("       - %s\n", f.c_str());
      }
    }
  }
  return failures;
}
