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

#include <benchmark/benchmark.h>

#include <sstream>

#include "procwatt/regression.hpp"
#include "procwatt/synth.hpp"
#include "procwatt/taxonomy.hpp"
#include "procwatt/trace.hpp"

namespace {

using namespace procwatt;

PowerModel bench_cpu_model() {
  PowerModel m;
  m.device = DeviceKind::kCpu;
  m.n_cores = 128;
  m.sigma = SigmaAssignment::for_device(DeviceKind::kCpu);
  m.gamma = {0.7, 35.7, 0.0, 38.7, 35.3, 154.5, 0.65, 0.32};
  m.intercept = 336.5;
  return m;
}

SynthPlan bench_plan(int reps) {
  SynthPlan plan;
  for (auto c : kAllClasses) {
    std::array<double, kNumClasses> probs{};
    probs[class_index(c)] = 1.0;
    WorkloadSpec w;
    w.name = std::string(class_name(c));
    w.histogram = InstructionHistogram::from_probabilities(probs);
    w.utilization = {1, 2, 4, 8, 16, 32, 64, 128};
    w.repetitions = reps;
    plan.workloads.push_back(std::move(w));
  }
  return plan;
}

DesignMatrix bench_matrix(int reps) {
  PowerModel truth = bench_cpu_model();
  Trace t = generate_trace(truth, bench_plan(reps), NoiseSpec{9.69, 1, 0.0});
  return to_design_matrix(t, truth.device, truth.sigma);
}

void BM_FitNnls(benchmark::State& state) {
  DesignMatrix d = bench_matrix(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_nnls(d));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(d.rows.size()));
}
BENCHMARK(BM_FitNnls)->Arg(10)->Arg(50);

void BM_FitOls(benchmark::State& state) {
  DesignMatrix d = bench_matrix(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_ols(d));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(d.rows.size()));
}
BENCHMARK(BM_FitOls)->Arg(10)->Arg(50);

void BM_PredictNode(benchmark::State& state) {
  PowerModel m = bench_cpu_model();
  NodeSample s;
  s.timestamp = 0;
  s.measured_power = 500;
  for (int i = 0; i < 16; ++i) {
    std::array<double, kNumClasses> probs{};
    probs[i % kNumClasses] = 1.0;
    s.processes.push_back({"p" + std::to_string(i), double(1 + i % 8),
                           InstructionHistogram::from_probabilities(probs),
                           0.0});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_node_power(s, m));
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_PredictNode);

void BM_ParseDisassembly(benchmark::State& state) {
  std::string listing;
  const char* lines[] = {"add rax, rbx",   "mov rcx, [rsi]",
                         "vaddpd ymm0, ymm1", "jne .L3",
                         "vmovaps ymm2, [rdi]", "xor eax, eax"};
  for (int i = 0; i < 10000; ++i) {
    listing += lines[i % 6];
    listing += '\n';
  }
  for (auto _ : state) {
    std::istringstream in(listing);
    benchmark::DoNotOptimize(parse_disassembly(in, DeviceKind::kCpu));
  }
  state.SetBytesProcessed(state.iterations() *
                          static_cast<int64_t>(listing.size()));
}
BENCHMARK(BM_ParseDisassembly);

void BM_TraceCsvRoundTrip(benchmark::State& state) {
  PowerModel truth = bench_cpu_model();
  Trace t = generate_trace(truth, bench_plan(10), NoiseSpec{9.69, 2, 0.0});
  for (auto _ : state) {
    std::stringstream buffer;
    write_trace(buffer, t, TraceFormat::kCsv);
    benchmark::DoNotOptimize(read_trace(buffer, TraceFormat::kCsv));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(t.samples.size()));
}
BENCHMARK(BM_TraceCsvRoundTrip);

}  // namespace

BENCHMARK_MAIN();
