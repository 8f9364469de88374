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

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "procwatt/taxonomy.hpp"

namespace procwatt {

/// How a class's histogram probability h and the process utilization w
/// combine into a regression feature: h*ln(w+1) or h*w.
enum class SigmaKind : std::uint8_t { kLinear, kLogLinear };

std::string_view sigma_kind_name(SigmaKind k);
std::optional<SigmaKind> sigma_kind_from_name(std::string_view name);

/// Per-class choice of feature transform.
///
/// The CPU default is log-linear for the memory classes (scalar and
/// vector) and vector arithmetic, where power flattens out as the degree
/// of parallelism grows, and linear for everything else. The GPU default
/// is linear for all 8 classes.
struct SigmaAssignment {
  std::array<SigmaKind, kNumClasses> kinds{};

  static SigmaAssignment for_device(DeviceKind device);

  SigmaKind operator[](InstructionClass c) const {
    return kinds[class_index(c)];
  }

  friend bool operator==(const SigmaAssignment&,
                         const SigmaAssignment&) = default;
};

/// One observation of one process within a sampling window.
struct ProcessSample {
  std::string pid;          ///< opaque process identifier
  double utilization = 0;   ///< CPU: cores in use [0, n_cores]; GPU: [0, 1]
  InstructionHistogram histogram;
  double timestamp = 0;     ///< seconds; equals the owning sample's time
};

/// One observation of node-level (PSU or GPU-card) power together with
/// the processes active in that window.
struct NodeSample {
  double timestamp = 0;
  double measured_power = 0;  ///< watts, > 0
  std::vector<ProcessSample> processes;
};

/// A fitted (or ground-truth) linear power model: per-class weights in
/// canonical class order, a static-power intercept, and the sigma
/// assignment the weights were fitted under.
struct PowerModel {
  DeviceKind device = DeviceKind::kCpu;
  std::array<double, kNumClasses> gamma{};  ///< watts per feature unit
  double intercept = 0;                     ///< watts, >= 0
  SigmaAssignment sigma = SigmaAssignment::for_device(DeviceKind::kCpu);
  int n_cores = 1;  ///< CPU utilization bound; 1 for GPU models

  friend bool operator==(const PowerModel&, const PowerModel&) = default;
};

/// Fit provenance stored alongside a model in its file.
struct ModelMetadata {
  double rmse = 0;
  double relative_error_midpoint = 0;  ///< percent
  std::size_t n_samples = 0;
  std::string timestamp;  ///< ISO-8601 fit time; empty if unknown
  std::string solver;     ///< "nnls", "ols" or empty
  bool ridge_fallback = false;
  bool intercept_refit = false;

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

/// sigma(h, w): h*ln(w+1) for log-linear classes, h*w for linear ones.
/// Exactly 0 when h = 0 or w = 0.
double sigma_feature(SigmaKind kind, double h, double w);

inline double sigma_feature(const SigmaAssignment& assignment,
                            InstructionClass c, double h, double w) {
  return sigma_feature(assignment[c], h, w);
}

using FeatureVector = std::array<double, kNumClasses>;

/// Maps a process observation to its 8 regression features under the
/// model's sigma assignment. All components are >= 0. Throws
/// ValidationError naming the pid if the utilization is outside the
/// device bounds.
FeatureVector feature_vector(const ProcessSample& p, const PowerModel& model);

/// Dynamic power attributed to one process: dot(gamma, features).
/// Excludes the intercept.
double predict_process_power(const ProcessSample& p, const PowerModel& model);

/// Node-level prediction: intercept plus the sum of per-process dynamic
/// powers. Equals the intercept exactly for an empty process list.
double predict_node_power(const NodeSample& s, const PowerModel& model);

/// Per-process shares of the sample's total dynamic power.
struct AttributionFractions {
  std::map<std::string, double> fractions;  ///< sums to 1 unless idle
  bool idle_window = false;  ///< all-zero dynamic power in this window
};

AttributionFractions attribution_fractions(const NodeSample& s,
                                           const PowerModel& model);

/// Serializes model + metadata as a versioned JSON document
/// (format_version 1). Doubles survive a round-trip bit-exactly.
void write_model(std::ostream& out, const PowerModel& model,
                 const ModelMetadata& metadata = {});
void write_model_file(const std::string& path, const PowerModel& model,
                      const ModelMetadata& metadata = {});

struct ModelFile {
  PowerModel model;
  ModelMetadata metadata;
};

ModelFile read_model(std::istream& in);
ModelFile read_model_file(const std::string& path);

}  // namespace procwatt
