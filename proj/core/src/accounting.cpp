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

#include "procwatt/accounting.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace procwatt {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kReportFormatVersion = 1;
constexpr double kGapFactor = 10.0;  // dt beyond 10x sample_period is a gap

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Trapezoid over the series, skipping flagged gap intervals.
double integrate(const std::vector<double>& t, const std::vector<double>& y,
                 const std::vector<bool>& is_gap) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (is_gap[i]) continue;
    total += 0.5 * (y[i] + y[i + 1]) * (t[i + 1] - t[i]);
  }
  return total;
}

}  // namespace

AttributionReport attribute_trace(const Trace& trace,
                                  const PowerModel& model) {
  if (trace.header.device != model.device) {
    throw ValidationError("model device does not match trace device");
  }

  AttributionReport report;
  const std::size_t n = trace.samples.size();
  report.timestamps.reserve(n);
  for (const auto& s : trace.samples) report.timestamps.push_back(s.timestamp);

  // Discontinuities: intervals wider than 10x the declared period.
  std::vector<bool> is_gap(n > 0 ? n - 1 : 0, false);
  const double max_dt = kGapFactor * trace.header.sample_period;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dt = report.timestamps[i + 1] - report.timestamps[i];
    if (dt > max_dt) {
      is_gap[i] = true;
      report.gaps.emplace_back(report.timestamps[i], report.timestamps[i + 1]);
    }
  }

  // Per-pid power series, zero where the pid is absent, ordered by
  // first appearance.
  std::map<std::string, std::size_t> pid_index;
  std::vector<double> measured(n), modeled(n);
  for (std::size_t i = 0; i < n; ++i) {
    const NodeSample& s = trace.samples[i];
    measured[i] = s.measured_power;
    double dynamic = 0.0;
    for (const auto& p : s.processes) {
      auto [it, inserted] = pid_index.try_emplace(p.pid, report.processes.size());
      if (inserted) {
        PidSeries series;
        series.pid = p.pid;
        series.power.assign(n, 0.0);
        report.processes.push_back(std::move(series));
      }
      const double watts = predict_process_power(p, model);
      report.processes[it->second].power[i] += watts;
      dynamic += watts;
    }
    modeled[i] = model.intercept + dynamic;
  }

  std::vector<double> ones(n, 1.0);
  const double duration = integrate(report.timestamps, ones, is_gap);
  report.idle_energy_joules = model.intercept * duration;
  report.total_measured_energy_joules =
      integrate(report.timestamps, measured, is_gap);
  report.modeled_energy_joules =
      integrate(report.timestamps, modeled, is_gap);

  double dynamic_energy = 0.0;
  for (auto& series : report.processes) {
    series.energy_joules = integrate(report.timestamps, series.power, is_gap);
    dynamic_energy += series.energy_joules;
  }
  for (auto& series : report.processes) {
    series.share_of_dynamic =
        dynamic_energy > 0.0 ? series.energy_joules / dynamic_energy : 0.0;
  }
  report.unexplained_energy_joules =
      report.total_measured_energy_joules - report.modeled_energy_joules;
  return report;
}

namespace {

void render_text(std::ostream& out, const AttributionReport& r) {
  out << "Per-process energy attribution\n";
  out << "==============================\n";
  std::size_t pid_width = 3;
  for (const auto& p : r.processes) {
    pid_width = std::max(pid_width, p.pid.size());
  }
  out << std::left << std::setw(static_cast<int>(pid_width) + 2) << "pid"
      << std::right << std::setw(16) << "energy_j" << std::setw(10)
      << "share" << std::setw(12) << "mean_w" << std::setw(12) << "peak_w"
      << '\n';
  for (const auto& p : r.processes) {
    double mean = 0.0;
    double peak = 0.0;
    for (double w : p.power) {
      mean += w;
      peak = std::max(peak, w);
    }
    if (!p.power.empty()) mean /= static_cast<double>(p.power.size());
    out << std::left << std::setw(static_cast<int>(pid_width) + 2) << p.pid
        << std::right << std::fixed << std::setprecision(3) << std::setw(16)
        << p.energy_joules << std::setw(10) << p.share_of_dynamic
        << std::setw(12) << mean << std::setw(12) << peak << '\n';
    out.unsetf(std::ios::fixed);
  }
  out << '\n';
  out << "samples:            " << r.timestamps.size() << '\n';
  out << std::fixed << std::setprecision(3);
  out << "idle energy:        " << r.idle_energy_joules << " J\n";
  out << "measured energy:    " << r.total_measured_energy_joules << " J\n";
  out << "modeled energy:     " << r.modeled_energy_joules << " J\n";
  out << "unexplained energy: " << r.unexplained_energy_joules << " J\n";
  out.unsetf(std::ios::fixed);
  if (!r.gaps.empty()) {
    out << "gaps (excluded from integration):\n";
    for (const auto& [a, b] : r.gaps) {
      out << "  " << format_double(a) << " -> " << format_double(b) << '\n';
    }
  }
}

void render_csv(std::ostream& out, const AttributionReport& r) {
  out << "pid,t,power_w\n";
  for (const auto& p : r.processes) {
    for (std::size_t i = 0; i < r.timestamps.size(); ++i) {
      out << p.pid << ',' << format_double(r.timestamps[i]) << ','
          << format_double(p.power[i]) << '\n';
    }
  }
  out << "# totals\n";
  out << "pid,energy_joules,share_of_dynamic\n";
  for (const auto& p : r.processes) {
    out << p.pid << ',' << format_double(p.energy_joules) << ','
        << format_double(p.share_of_dynamic) << '\n';
  }
  out << "# node\n";
  out << "idle_energy_joules," << format_double(r.idle_energy_joules) << '\n';
  out << "total_measured_energy_joules,"
      << format_double(r.total_measured_energy_joules) << '\n';
  out << "modeled_energy_joules," << format_double(r.modeled_energy_joules)
      << '\n';
  out << "unexplained_energy_joules,"
      << format_double(r.unexplained_energy_joules) << '\n';
  out << "gap_count," << r.gaps.size() << '\n';
}

void render_json(std::ostream& out, const AttributionReport& r) {
  ordered_json j;
  j["format_version"] = kReportFormatVersion;
  j["timestamps"] = r.timestamps;
  j["processes"] = ordered_json::array();
  for (const auto& p : r.processes) {
    ordered_json proc;
    proc["pid"] = p.pid;
    proc["power_w"] = p.power;
    proc["energy_joules"] = p.energy_joules;
    proc["share_of_dynamic"] = p.share_of_dynamic;
    j["processes"].push_back(proc);
  }
  ordered_json node;
  node["idle_energy_joules"] = r.idle_energy_joules;
  node["total_measured_energy_joules"] = r.total_measured_energy_joules;
  node["modeled_energy_joules"] = r.modeled_energy_joules;
  node["unexplained_energy_joules"] = r.unexplained_energy_joules;
  j["node"] = node;
  j["gaps"] = ordered_json::array();
  for (const auto& [a, b] : r.gaps) {
    j["gaps"].push_back(std::vector<double>{a, b});
  }
  out << j.dump(2) << '\n';
}

}  // namespace

void render_report(std::ostream& out, const AttributionReport& report,
                   ReportFormat format) {
  switch (format) {
    case ReportFormat::kText:
      render_text(out, report);
      break;
    case ReportFormat::kCsv:
      render_csv(out, report);
      break;
    case ReportFormat::kJson:
      render_json(out, report);
      break;
  }
  if (!out) throw IoError("failed to write report");
}

AttributionReport parse_report_json(std::istream& in) {
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report document is not valid JSON: ") +
                          e.what());
  }
  AttributionReport r;
  try {
    if (j.at("format_version").get<int>() != kReportFormatVersion) {
      throw ValidationError("unsupported report format_version");
    }
    r.timestamps = j.at("timestamps").get<std::vector<double>>();
    for (const auto& proc : j.at("processes")) {
      PidSeries p;
      p.pid = proc.at("pid").get<std::string>();
      p.power = proc.at("power_w").get<std::vector<double>>();
      p.energy_joules = proc.at("energy_joules").get<double>();
      p.share_of_dynamic = proc.at("share_of_dynamic").get<double>();
      r.processes.push_back(std::move(p));
    }
    const auto& node = j.at("node");
    r.idle_energy_joules = node.at("idle_energy_joules").get<double>();
    r.total_measured_energy_joules =
        node.at("total_measured_energy_joules").get<double>();
    r.modeled_energy_joules = node.at("modeled_energy_joules").get<double>();
    r.unexplained_energy_joules =
        node.at("unexplained_energy_joules").get<double>();
    for (const auto& gap : j.at("gaps")) {
      auto pair = gap.get<std::vector<double>>();
      if (pair.size() != 2) {
        throw ValidationError("gap entries must be [start, end] pairs");
      }
      r.gaps.emplace_back(pair[0], pair[1]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report document: ") +
                          e.what());
  }
  return r;
}

}  // namespace procwatt
