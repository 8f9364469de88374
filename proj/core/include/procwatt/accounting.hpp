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
#include <utility>
#include <vector>

#include "procwatt/model.hpp"
#include "procwatt/trace.hpp"

namespace procwatt {

/// One process's attributed power series over a trace, with its time
/// integral and share of the total dynamic energy.
struct PidSeries {
  std::string pid;
  std::vector<double> power;  ///< watts, aligned with timestamps; 0 if absent
  double energy_joules = 0;
  double share_of_dynamic = 0;  ///< shares sum to 1 unless the trace is idle
};

/// Per-process energy attribution over a whole trace. Idle (intercept)
/// energy is reported as node overhead, never prorated to processes,
/// and the measured-minus-modeled residual is surfaced as unexplained
/// energy rather than distributed.
struct AttributionReport {
  std::vector<double> timestamps;
  std::vector<PidSeries> processes;  ///< ordered by first appearance
  double idle_energy_joules = 0;     ///< intercept x integrated duration
  double total_measured_energy_joules = 0;
  double modeled_energy_joules = 0;  ///< integral of the node prediction
  double unexplained_energy_joules = 0;  ///< measured - modeled
  /// Sampling discontinuities (intervals wider than 10x the header
  /// sample period); no energy is credited across them.
  std::vector<std::pair<double, double>> gaps;
};

/// Attributes per-process dynamic power at every sample and integrates
/// it with the trapezoidal rule. Throws ValidationError when trace and
/// model devices differ.
AttributionReport attribute_trace(const Trace& trace, const PowerModel& model);

enum class ReportFormat { kText, kCsv, kJson };

/// Renders a report: an aligned human-readable table (text), a
/// plot-ready flat file with one row per (pid, timestamp) plus totals
/// (csv), or the full structure (json; lossless, see
/// parse_report_json).
void render_report(std::ostream& out, const AttributionReport& report,
                   ReportFormat format);

AttributionReport parse_report_json(std::istream& in);

}  // namespace procwatt
