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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "procwatt/model.hpp"
#include "procwatt/trace.hpp"

namespace procwatt {

/// A synthetic workload: a fixed instruction mix swept over a schedule
/// of utilization levels, each level repeated `repetitions` times.
struct WorkloadSpec {
  std::string name;
  InstructionHistogram histogram;
  std::vector<double> utilization;
  int repetitions = 50;
};

/// Additive Gaussian measurement noise. A nonzero outlier fraction
/// contaminates that share of draws with 10x the standard deviation,
/// mimicking sampling-time artifacts in real collectors.
struct NoiseSpec {
  double sd = 0.0;  ///< watts, >= 0
  std::uint64_t seed = 0;
  double outlier_fraction = 0.0;  ///< in [0, 1]
};

/// A full generation plan: the workload roster plus optional concurrent
/// groupings. When `groups` is empty every workload runs in isolation;
/// otherwise each group's members run concurrently (their schedules and
/// repetition counts must agree in length) and only grouped workloads
/// are emitted.
struct SynthPlan {
  double sample_period = 1.0;  ///< seconds between samples
  std::vector<WorkloadSpec> workloads;
  std::vector<std::vector<std::string>> groups;
};

/// Parses a JSON plan document:
///   {"sample_period": 1.0,
///    "workloads": [{"name": ..., "histogram": [8 probs],
///                   "utilization": [...], "repetitions": 50}],
///    "groups": [["a", "b"], ...]}   // optional
SynthPlan read_synth_plan(std::istream& in);
SynthPlan read_synth_plan_file(const std::string& path);

/// Deterministic Gaussian sampler: Box-Muller over std::mt19937_64.
/// Both pieces are pinned by the standard, so a seed reproduces the
/// identical stream on any conforming implementation with the same
/// floating-point library.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}

  /// One N(0, sd^2) draw.
  double operator()(double sd);

  /// One uniform draw in [0, 1).
  double uniform();

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Simulates a node running the plan under the ground-truth model:
/// every emitted sample's measured power is the model's node prediction
/// plus one noise draw. Bit-identical output for a fixed seed. The
/// generator name and seed are recorded in the trace header source.
Trace generate_trace(const PowerModel& truth, const SynthPlan& plan,
                     const NoiseSpec& noise);

/// Ground-truth per-process dynamic power of one sample; the reference
/// against which fitted-model attribution error is measured.
std::map<std::string, double> oracle_attribution(const PowerModel& truth,
                                                 const NodeSample& s);

}  // namespace procwatt
