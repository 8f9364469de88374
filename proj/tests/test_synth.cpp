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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "procwatt/regression.hpp"
#include "procwatt/synth.hpp"
#include "support/reference_models.hpp"

using namespace procwatt;
using procwatt::testing::reference_cpu_model;
using procwatt::testing::reference_gpu_model;

namespace {

InstructionHistogram one_hot(InstructionClass c) {
  std::array<double, kNumClasses> probs{};
  probs[class_index(c)] = 1.0;
  return InstructionHistogram::from_probabilities(probs);
}

SynthPlan full_rank_cpu_plan(int repetitions = 5) {
  SynthPlan plan;
  plan.sample_period = 1.0;
  for (auto c : kAllClasses) {
    WorkloadSpec w;
    w.name = std::string(class_name(c));
    w.histogram = one_hot(c);
    w.utilization = {1, 2, 4, 8, 16, 32, 64, 128};
    w.repetitions = repetitions;
    plan.workloads.push_back(std::move(w));
  }
  return plan;
}

}  // namespace

TEST_CASE("noise-free generation reproduces the model exactly") {
  PowerModel truth = reference_cpu_model();
  SynthPlan plan = full_rank_cpu_plan(2);
  Trace t = generate_trace(truth, plan, NoiseSpec{0.0, 1, 0.0});
  REQUIRE(t.samples.size() == 8 * 8 * 2);
  for (const auto& s : t.samples) {
    CHECK(s.measured_power == predict_node_power(s, truth));
  }
  CHECK(t.header.source.find("mt19937_64") != std::string::npos);
  CHECK(t.header.source.find("seed=1") != std::string::npos);
}

TEST_CASE("grouped workloads compose additively") {
  PowerModel truth = reference_gpu_model();
  SynthPlan plan;
  plan.sample_period = 0.5;
  WorkloadSpec a{"kernels", one_hot(InstructionClass::kScalarArithmetic),
                 {0.25, 0.5}, 3};
  WorkloadSpec b{"copies", one_hot(InstructionClass::kScalarMemory),
                 {0.5, 0.25}, 3};
  plan.workloads = {a, b};
  plan.groups = {{"kernels", "copies"}};

  Trace t = generate_trace(truth, plan, NoiseSpec{0.0, 7, 0.0});
  REQUIRE(t.samples.size() == 2 * 3);
  for (const auto& s : t.samples) {
    REQUIRE(s.processes.size() == 2);
    auto oracle = oracle_attribution(truth, s);
    CHECK(s.measured_power ==
          doctest::Approx(truth.intercept + oracle.at("kernels") +
                          oracle.at("copies"))
              .epsilon(1e-12));
  }
}

TEST_CASE("a fixed seed reproduces the trace bit for bit") {
  PowerModel truth = reference_cpu_model();
  SynthPlan plan = full_rank_cpu_plan(2);
  NoiseSpec noise{9.69, 12345, 0.05};
  Trace a = generate_trace(truth, plan, noise);
  Trace b = generate_trace(truth, plan, noise);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].measured_power == b.samples[i].measured_power);
  }
  std::ostringstream da, db;
  write_trace(da, a, TraceFormat::kCsv);
  write_trace(db, b, TraceFormat::kCsv);
  CHECK(da.str() == db.str());

  NoiseSpec other{9.69, 54321, 0.05};
  Trace c = generate_trace(truth, plan, other);
  bool any_differs = false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    if (a.samples[i].measured_power != c.samples[i].measured_power) {
      any_differs = true;
      break;
    }
  }
  CHECK(any_differs);
}

TEST_CASE("noise-free generate -> fit -> predict closes the loop") {
  PowerModel truth = reference_cpu_model();
  Trace t = generate_trace(truth, full_rank_cpu_plan(2), NoiseSpec{0, 3, 0});
  DesignMatrix d = to_design_matrix(t, truth.device, truth.sigma);
  FitReport report = fit_nnls(d);
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    const double predicted = predict_node_power(t.samples[i], report.model);
    CHECK(predicted ==
          doctest::Approx(t.samples[i].measured_power).epsilon(1e-6));
  }
}

TEST_CASE("generated traces survive the trace validator") {
  PowerModel truth = reference_gpu_model();
  SynthPlan plan;
  WorkloadSpec w{"gemm", one_hot(InstructionClass::kScalarArithmetic),
                 {0.1, 0.5, 1.0}, 4};
  plan.workloads = {w};
  Trace t = generate_trace(truth, plan, NoiseSpec{12.3, 9, 0.0});
  for (TraceFormat format : {TraceFormat::kCsv, TraceFormat::kJson}) {
    std::stringstream buffer;
    write_trace(buffer, t, format);
    CHECK_NOTHROW(read_trace(buffer, format));
  }
}

TEST_CASE("oracle attribution evaluates the ground truth") {
  PowerModel gpu = reference_gpu_model();
  SUBCASE("zero utilization draws nothing") {
    NodeSample s{0.0, 50.0,
                 {{"p", 0.0, one_hot(InstructionClass::kScalarMemory), 0.0}}};
    CHECK(oracle_attribution(gpu, s).at("p") == 0.0);
  }
  SUBCASE("one-hot scalar memory at full occupancy") {
    NodeSample s{0.0, 70.0,
                 {{"p", 1.0, one_hot(InstructionClass::kScalarMemory), 0.0}}};
    CHECK(oracle_attribution(gpu, s).at("p") ==
          doctest::Approx(33.0339).epsilon(1e-9));
  }
  SUBCASE("symmetric processes earn identical attributions") {
    ProcessSample a{"a", 0.5, one_hot(InstructionClass::kVectorMemory), 0.0};
    ProcessSample b = a;
    b.pid = "b";
    NodeSample s{0.0, 150.0, {a, b}};
    auto watts = oracle_attribution(gpu, s);
    CHECK(watts.at("a") == watts.at("b"));
  }
}

TEST_CASE("plan documents parse and validate") {
  SUBCASE("round trip through JSON text") {
    std::istringstream in(R"({
      "sample_period": 0.25,
      "workloads": [
        {"name": "one", "histogram": [1,0,0,0,0,0,0,0],
         "utilization": [1, 2], "repetitions": 3},
        {"name": "two", "histogram": [0,1,0,0,0,0,0,0],
         "utilization": [2, 1]}
      ],
      "groups": [["one", "two"]]
    })");
    SynthPlan plan = read_synth_plan(in);
    CHECK(plan.sample_period == 0.25);
    REQUIRE(plan.workloads.size() == 2);
    CHECK(plan.workloads[0].repetitions == 3);
    CHECK(plan.workloads[1].repetitions == 50);  // default
    REQUIRE(plan.groups.size() == 1);
  }
  SUBCASE("generation rejects bad plans") {
    PowerModel truth = reference_cpu_model();
    SynthPlan plan;
    CHECK_THROWS_AS(generate_trace(truth, plan, {}), ValidationError);

    WorkloadSpec w{"w", one_hot(InstructionClass::kBranch), {1.0}, 1};
    plan.workloads = {w};
    plan.groups = {{"nonexistent"}};
    CHECK_THROWS_AS(generate_trace(truth, plan, {}), ValidationError);

    plan.groups.clear();
    plan.workloads[0].utilization = {1.0, 200.0};  // beyond 128 cores
    CHECK_THROWS_AS(generate_trace(truth, plan, {}), ValidationError);

    plan.workloads[0].utilization = {1.0};
    plan.workloads[0].repetitions = 0;
    CHECK_THROWS_AS(generate_trace(truth, plan, {}), ValidationError);

    plan.workloads[0].repetitions = 1;
    NoiseSpec negative{-1.0, 0, 0.0};
    CHECK_THROWS_AS(generate_trace(truth, plan, negative), ValidationError);

    WorkloadSpec mismatched{"m", one_hot(InstructionClass::kJump),
                            {1.0, 2.0}, 1};
    plan.workloads.push_back(mismatched);
    plan.groups = {{"w", "m"}};  // schedule lengths differ
    CHECK_THROWS_AS(generate_trace(truth, plan, {}), ValidationError);
  }
}

TEST_CASE("outlier contamination stays deterministic per seed") {
  PowerModel truth = reference_gpu_model();
  SynthPlan plan;
  plan.workloads = {WorkloadSpec{
      "k", one_hot(InstructionClass::kScalarArithmetic), {0.5, 1.0}, 25}};
  NoiseSpec contaminated{12.3, 77, 0.2};
  Trace a = generate_trace(truth, plan, contaminated);
  Trace b = generate_trace(truth, plan, contaminated);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].measured_power == b.samples[i].measured_power);
  }
  // contamination widens the spread vs. the clean run at the same seed
  NoiseSpec clean{12.3, 77, 0.0};
  Trace c = generate_trace(truth, plan, clean);
  double spread_a = 0.0, spread_c = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const double truth_power = predict_node_power(a.samples[i], truth);
    spread_a = std::max(spread_a,
                        std::abs(a.samples[i].measured_power - truth_power));
    spread_c = std::max(spread_c,
                        std::abs(c.samples[i].measured_power - truth_power));
  }
  CHECK(spread_a >= spread_c);
}
