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

#include <iosfwd>
#include <string>
#include <vector>

#include "procwatt/model.hpp"
#include "procwatt/regression.hpp"

namespace procwatt {

/// Provenance and collection parameters of a recorded trace.
struct TraceHeader {
  DeviceKind device = DeviceKind::kCpu;
  int n_cores = 1;             ///< CPU traces; 1 for GPU
  double sample_period = 1.0;  ///< seconds, > 0
  std::string source;          ///< free-text provenance

  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

/// A time-ordered recording of node power and per-process activity.
/// Timestamps are strictly increasing; every process utilization lies
/// within the device bounds declared by the header.
struct Trace {
  TraceHeader header;
  std::vector<NodeSample> samples;
};

enum class TraceFormat { kCsv, kJson };

/// Parses and fully validates a trace. Histogram sums off by more than
/// 1e-9 but within 1e-6 are renormalized; every violation beyond that
/// raises a TraceError carrying its category and record number.
///
/// CSV layout: '#'-prefixed `key=value` preamble (device, n_cores,
/// sample_period, source), one column-header row, then one row per
/// process observation: `t,power_w,pid,w,h_sa,...,h_jp`. Consecutive
/// rows sharing a timestamp form one multi-process sample; a row with
/// only `t,power_w` is a sample with no processes. JSON is the nested
/// canonical form with the same content.
Trace read_trace(std::istream& in, TraceFormat format);
Trace read_trace_file(const std::string& path, TraceFormat format);

/// Inverse of read_trace. Doubles are written so they parse back
/// bit-identically in both formats.
void write_trace(std::ostream& out, const Trace& trace, TraceFormat format);
void write_trace_file(const std::string& path, const Trace& trace,
                      TraceFormat format);

/// Guesses the format from a file extension (".json" -> JSON, anything
/// else CSV).
TraceFormat trace_format_for_path(const std::string& path);

/// Assembles the regression inputs of a trace: one row per node sample,
/// each row the element-wise sum of the feature vectors of every
/// process active in the sample (a single-process trace yields plain
/// per-process rows), target = measured power. The sigma assignment
/// must belong to `device`, which must match the trace header.
DesignMatrix to_design_matrix(const Trace& trace, DeviceKind device,
                              const SigmaAssignment& sigma);

}  // namespace procwatt
