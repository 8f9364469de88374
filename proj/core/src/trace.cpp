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

#include "procwatt/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace procwatt {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kTraceFormatVersion = 1;
constexpr double kHistogramInputTolerance = 1e-6;

// Shortest representation that parses back to the identical double.
std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view field, std::size_t record,
                    const char* what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(),
                                   value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw TraceError(TraceErrorKind::kSchema, record,
                     "record " + std::to_string(record) + ": '" +
                         std::string(field) + "' is not a valid " + what);
  }
  return value;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string csv_column_header() {
  std::string header = "t,power_w,pid,w";
  for (auto c : kAllClasses) {
    header += ",h_";
    header += class_short_name(c);
  }
  return header;
}

double utilization_bound(const TraceHeader& h) {
  return h.device == DeviceKind::kCpu ? static_cast<double>(h.n_cores) : 1.0;
}

InstructionHistogram histogram_from_fields(
    const std::array<double, kNumClasses>& probs, std::size_t record) {
  try {
    return InstructionHistogram::from_probabilities(probs,
                                                    kHistogramInputTolerance);
  } catch (const ValidationError& e) {
    throw TraceError(TraceErrorKind::kHistogramSum, record,
                     "record " + std::to_string(record) + ": " + e.what());
  }
}

// Invariant checks shared by both readers. `record` numbering follows
// the reader's notion (CSV data row / JSON sample index).
void validate_trace(const Trace& trace) {
  if (trace.header.sample_period <= 0.0) {
    throw TraceError(TraceErrorKind::kSchema, 0,
                     "sample_period must be > 0");
  }
  if (trace.header.n_cores < 1) {
    throw TraceError(TraceErrorKind::kSchema, 0, "n_cores must be positive");
  }
  const double bound = utilization_bound(trace.header);
  double prev_t = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const NodeSample& s = trace.samples[i];
    if (!(s.timestamp > prev_t)) {
      throw TraceError(TraceErrorKind::kNonMonotoneTimestamp, i,
                       "sample " + std::to_string(i) +
                           ": timestamps must be strictly increasing");
    }
    prev_t = s.timestamp;
    if (!(s.measured_power > 0.0) || !std::isfinite(s.measured_power)) {
      throw TraceError(TraceErrorKind::kSchema, i,
                       "sample " + std::to_string(i) +
                           ": measured power must be > 0");
    }
    for (const auto& p : s.processes) {
      if (p.timestamp != s.timestamp) {
        throw TraceError(TraceErrorKind::kSchema, i,
                         "sample " + std::to_string(i) + ": process '" +
                             p.pid + "' timestamp differs from sample");
      }
      if (p.pid.empty()) {
        throw TraceError(TraceErrorKind::kSchema, i,
                         "sample " + std::to_string(i) + ": empty pid");
      }
      if (!(p.utilization >= 0.0) || p.utilization > bound) {
        throw TraceError(TraceErrorKind::kUtilizationBounds, i,
                         "sample " + std::to_string(i) + ": process '" +
                             p.pid + "' utilization " +
                             std::to_string(p.utilization) +
                             " outside [0, " + std::to_string(bound) + "]");
      }
    }
  }
}

Trace read_trace_csv(std::istream& in) {
  Trace trace;
  bool have_device = false;
  bool saw_column_header = false;
  std::string line;
  std::size_t data_row = 0;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view body(line);
      body.remove_prefix(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;  // plain comment
      std::string_view key = body.substr(0, eq);
      std::string_view value = body.substr(eq + 1);
      if (key == "device") {
        auto dev = device_from_name(value);
        if (!dev) {
          throw TraceError(TraceErrorKind::kSchema, 0,
                           "unknown device '" + std::string(value) + "'");
        }
        trace.header.device = *dev;
        have_device = true;
      } else if (key == "n_cores") {
        trace.header.n_cores =
            static_cast<int>(parse_double(value, 0, "core count"));
      } else if (key == "sample_period") {
        trace.header.sample_period = parse_double(value, 0, "sample period");
      } else if (key == "source") {
        trace.header.source = std::string(value);
      }
      continue;
    }
    if (!saw_column_header) {
      if (line != csv_column_header()) {
        throw TraceError(TraceErrorKind::kSchema, 0,
                         "expected column header '" + csv_column_header() +
                             "', got '" + line + "'");
      }
      saw_column_header = true;
      continue;
    }

    ++data_row;
    auto fields = split_csv(line);
    if (fields.size() != 2 && fields.size() != 4 + kNumClasses) {
      throw TraceError(TraceErrorKind::kSchema, data_row,
                       "record " + std::to_string(data_row) + ": expected 2 or " +
                           std::to_string(4 + kNumClasses) +
                           " fields, got " + std::to_string(fields.size()));
    }
    const double t = parse_double(fields[0], data_row, "timestamp");
    const double power = parse_double(fields[1], data_row, "power");

    const bool new_sample =
        trace.samples.empty() || trace.samples.back().timestamp != t;
    if (new_sample) {
      trace.samples.push_back({t, power, {}});
    } else if (trace.samples.back().measured_power != power) {
      throw TraceError(TraceErrorKind::kSchema, data_row,
                       "record " + std::to_string(data_row) +
                           ": rows sharing a timestamp disagree on power");
    }
    if (fields.size() == 2) {
      if (!new_sample) {
        throw TraceError(TraceErrorKind::kSchema, data_row,
                         "record " + std::to_string(data_row) +
                             ": node-only row repeats an existing timestamp");
      }
      continue;
    }

    ProcessSample p;
    p.pid = std::string(fields[2]);
    if (p.pid.empty()) {
      throw TraceError(TraceErrorKind::kSchema, data_row,
                       "record " + std::to_string(data_row) + ": empty pid");
    }
    p.utilization = parse_double(fields[3], data_row, "utilization");
    p.timestamp = t;
    std::array<double, kNumClasses> probs{};
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      probs[i] = parse_double(fields[4 + i], data_row, "histogram entry");
    }
    p.histogram = histogram_from_fields(probs, data_row);
    trace.samples.back().processes.push_back(std::move(p));
  }
  if (in.bad()) throw IoError("stream failure while reading trace");
  if (!have_device) {
    throw TraceError(TraceErrorKind::kSchema, 0,
                     "missing '# device=' header line");
  }
  if (!saw_column_header) {
    throw TraceError(TraceErrorKind::kSchema, 0, "missing CSV column header");
  }
  return trace;
}

Trace read_trace_json(std::istream& in) {
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw TraceError(TraceErrorKind::kSchema, 0,
                     std::string("trace document is not valid JSON: ") +
                         e.what());
  }
  Trace trace;
  try {
    if (j.at("format_version").get<int>() != kTraceFormatVersion) {
      throw TraceError(TraceErrorKind::kSchema, 0,
                       "unsupported trace format_version");
    }
    const auto& header = j.at("header");
    auto dev = device_from_name(header.at("device").get<std::string>());
    if (!dev) {
      throw TraceError(TraceErrorKind::kSchema, 0, "unknown device");
    }
    trace.header.device = *dev;
    trace.header.n_cores = header.value("n_cores", 1);
    trace.header.sample_period = header.at("sample_period").get<double>();
    trace.header.source = header.value("source", std::string{});

    std::size_t index = 0;
    for (const auto& sample : j.at("samples")) {
      NodeSample s;
      s.timestamp = sample.at("t").get<double>();
      s.measured_power = sample.at("power_w").get<double>();
      if (auto procs = sample.find("processes"); procs != sample.end()) {
        for (const auto& proc : *procs) {
          ProcessSample p;
          p.pid = proc.at("pid").get<std::string>();
          p.utilization = proc.at("w").get<double>();
          p.timestamp = s.timestamp;
          auto h = proc.at("h").get<std::vector<double>>();
          if (h.size() != kNumClasses) {
            throw TraceError(TraceErrorKind::kSchema, index,
                             "sample " + std::to_string(index) +
                                 ": histogram must have 8 entries");
          }
          std::array<double, kNumClasses> probs{};
          std::copy(h.begin(), h.end(), probs.begin());
          p.histogram = histogram_from_fields(probs, index);
          s.processes.push_back(std::move(p));
        }
      }
      trace.samples.push_back(std::move(s));
      ++index;
    }
  } catch (const nlohmann::json::exception& e) {
    throw TraceError(TraceErrorKind::kSchema, 0,
                     std::string("malformed trace document: ") + e.what());
  }
  return trace;
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  auto check_text = [](const std::string& text, const char* what) {
    if (text.find(',') != std::string::npos ||
        text.find('\n') != std::string::npos) {
      throw ValidationError(std::string(what) +
                            " contains a comma or newline; use the JSON "
                            "trace format instead");
    }
  };
  check_text(trace.header.source, "trace source");
  out << "# procwatt trace\n";
  out << "# device=" << device_name(trace.header.device) << '\n';
  out << "# n_cores=" << trace.header.n_cores << '\n';
  out << "# sample_period=" << format_double(trace.header.sample_period)
      << '\n';
  if (!trace.header.source.empty()) {
    out << "# source=" << trace.header.source << '\n';
  }
  out << csv_column_header() << '\n';
  for (const auto& s : trace.samples) {
    const std::string t = format_double(s.timestamp);
    const std::string power = format_double(s.measured_power);
    if (s.processes.empty()) {
      out << t << ',' << power << '\n';
      continue;
    }
    for (const auto& p : s.processes) {
      check_text(p.pid, "pid");
      out << t << ',' << power << ',' << p.pid << ','
          << format_double(p.utilization);
      for (double h : p.histogram.probs()) out << ',' << format_double(h);
      out << '\n';
    }
  }
}

void write_trace_json(std::ostream& out, const Trace& trace) {
  ordered_json j;
  j["format_version"] = kTraceFormatVersion;
  ordered_json header;
  header["device"] = std::string(device_name(trace.header.device));
  header["n_cores"] = trace.header.n_cores;
  header["sample_period"] = trace.header.sample_period;
  header["source"] = trace.header.source;
  j["header"] = header;
  j["samples"] = ordered_json::array();
  for (const auto& s : trace.samples) {
    ordered_json sample;
    sample["t"] = s.timestamp;
    sample["power_w"] = s.measured_power;
    sample["processes"] = ordered_json::array();
    for (const auto& p : s.processes) {
      ordered_json proc;
      proc["pid"] = p.pid;
      proc["w"] = p.utilization;
      proc["h"] = p.histogram.probs();
      sample["processes"].push_back(proc);
    }
    j["samples"].push_back(sample);
  }
  out << j.dump(2) << '\n';
}

}  // namespace

Trace read_trace(std::istream& in, TraceFormat format) {
  Trace trace = format == TraceFormat::kCsv ? read_trace_csv(in)
                                            : read_trace_json(in);
  validate_trace(trace);
  return trace;
}

Trace read_trace_file(const std::string& path, TraceFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file: " + path);
  return read_trace(in, format);
}

void write_trace(std::ostream& out, const Trace& trace, TraceFormat format) {
  if (format == TraceFormat::kCsv) {
    write_trace_csv(out, trace);
  } else {
    write_trace_json(out, trace);
  }
  if (!out) throw IoError("failed to write trace");
}

void write_trace_file(const std::string& path, const Trace& trace,
                      TraceFormat format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open trace file for writing: " + path);
  write_trace(out, trace, format);
}

TraceFormat trace_format_for_path(const std::string& path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    return TraceFormat::kJson;
  }
  return TraceFormat::kCsv;
}

DesignMatrix to_design_matrix(const Trace& trace, DeviceKind device,
                              const SigmaAssignment& sigma) {
  if (device != trace.header.device) {
    throw ValidationError("design-matrix device does not match trace device");
  }
  if (trace.samples.empty()) {
    throw ValidationError("cannot build a design matrix from an empty trace");
  }
  PowerModel feature_template;
  feature_template.device = device;
  feature_template.sigma = sigma;
  feature_template.n_cores = trace.header.n_cores;

  DesignMatrix d;
  d.device = device;
  d.sigma = sigma;
  d.n_cores = trace.header.n_cores;
  d.rows.reserve(trace.samples.size());
  d.targets.reserve(trace.samples.size());
  for (const auto& s : trace.samples) {
    FeatureVector row{};
    for (const auto& p : s.processes) {
      FeatureVector f = feature_vector(p, feature_template);
      for (std::size_t i = 0; i < kNumClasses; ++i) row[i] += f[i];
    }
    d.rows.push_back(row);
    d.targets.push_back(s.measured_power);
  }
  return d;
}

}  // namespace procwatt
