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

#include "procwatt/model.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include <json.hpp>

namespace procwatt {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kModelFormatVersion = 1;

double device_utilization_bound(DeviceKind device, int n_cores) {
  return device == DeviceKind::kCpu ? static_cast<double>(n_cores) : 1.0;
}

}  // namespace

std::string_view sigma_kind_name(SigmaKind k) {
  return k == SigmaKind::kLinear ? "linear" : "log_linear";
}

std::optional<SigmaKind> sigma_kind_from_name(std::string_view name) {
  if (name == "linear") return SigmaKind::kLinear;
  if (name == "log_linear") return SigmaKind::kLogLinear;
  return std::nullopt;
}

SigmaAssignment SigmaAssignment::for_device(DeviceKind device) {
  SigmaAssignment a;
  a.kinds.fill(SigmaKind::kLinear);
  if (device == DeviceKind::kCpu) {
    a.kinds[class_index(InstructionClass::kScalarMemory)] =
        SigmaKind::kLogLinear;
    a.kinds[class_index(InstructionClass::kVectorMemory)] =
        SigmaKind::kLogLinear;
    a.kinds[class_index(InstructionClass::kVectorArithmetic)] =
        SigmaKind::kLogLinear;
  }
  return a;
}

double sigma_feature(SigmaKind kind, double h, double w) {
  if (h == 0.0 || w == 0.0) return 0.0;
  return kind == SigmaKind::kLogLinear ? h * std::log(w + 1.0) : h * w;
}

FeatureVector feature_vector(const ProcessSample& p, const PowerModel& model) {
  const double bound = device_utilization_bound(model.device, model.n_cores);
  if (!(p.utilization >= 0.0) || p.utilization > bound) {
    throw ValidationError("utilization " + std::to_string(p.utilization) +
                          " of process '" + p.pid + "' outside [0, " +
                          std::to_string(bound) + "]");
  }
  FeatureVector f{};
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    f[i] = sigma_feature(model.sigma.kinds[i], p.histogram.probs()[i],
                         p.utilization);
  }
  return f;
}

double predict_process_power(const ProcessSample& p, const PowerModel& model) {
  const FeatureVector f = feature_vector(p, model);
  double power = 0.0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    power += model.gamma[i] * f[i];
  }
  return power;
}

double predict_node_power(const NodeSample& s, const PowerModel& model) {
  double power = model.intercept;
  for (const auto& p : s.processes) {
    power += predict_process_power(p, model);
  }
  return power;
}

AttributionFractions attribution_fractions(const NodeSample& s,
                                           const PowerModel& model) {
  AttributionFractions result;
  double total = 0.0;
  std::map<std::string, double> dynamic;
  for (const auto& p : s.processes) {
    double watts = predict_process_power(p, model);
    dynamic[p.pid] += watts;
    total += watts;
  }
  if (total <= 0.0) {
    result.idle_window = true;
    for (auto& [pid, watts] : dynamic) result.fractions[pid] = 0.0;
    return result;
  }
  for (auto& [pid, watts] : dynamic) result.fractions[pid] = watts / total;
  return result;
}

void write_model(std::ostream& out, const PowerModel& model,
                 const ModelMetadata& metadata) {
  ordered_json sigma;
  for (auto c : kAllClasses) {
    sigma[std::string(class_name(c))] =
        std::string(sigma_kind_name(model.sigma[c]));
  }
  ordered_json j;
  j["format_version"] = kModelFormatVersion;
  j["device"] = std::string(device_name(model.device));
  j["n_cores"] = model.n_cores;
  j["sigma"] = sigma;
  j["gamma"] = model.gamma;
  j["intercept"] = model.intercept;
  ordered_json meta;
  meta["rmse"] = metadata.rmse;
  meta["relative_error_midpoint"] = metadata.relative_error_midpoint;
  meta["n_samples"] = metadata.n_samples;
  meta["timestamp"] = metadata.timestamp;
  meta["solver"] = metadata.solver;
  meta["ridge_fallback"] = metadata.ridge_fallback;
  meta["intercept_refit"] = metadata.intercept_refit;
  j["metadata"] = meta;
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed to write model document");
}

void write_model_file(const std::string& path, const PowerModel& model,
                      const ModelMetadata& metadata) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open model file for writing: " + path);
  write_model(out, model, metadata);
}

ModelFile read_model(std::istream& in) {
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model document is not valid JSON: ") +
                          e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw ValidationError("unsupported model format_version");
    }
    ModelFile file;
    auto device = device_from_name(j.at("device").get<std::string>());
    if (!device) throw ValidationError("unknown device in model document");
    file.model.device = *device;
    file.model.n_cores = j.at("n_cores").get<int>();
    if (file.model.n_cores < 1) {
      throw ValidationError("n_cores must be positive");
    }
    for (auto c : kAllClasses) {
      auto kind = sigma_kind_from_name(
          j.at("sigma").at(std::string(class_name(c))).get<std::string>());
      if (!kind) throw ValidationError("unknown sigma kind in model document");
      file.model.sigma.kinds[class_index(c)] = *kind;
    }
    auto gamma = j.at("gamma").get<std::vector<double>>();
    if (gamma.size() != kNumClasses) {
      throw ValidationError("gamma must have exactly 8 entries");
    }
    std::copy(gamma.begin(), gamma.end(), file.model.gamma.begin());
    file.model.intercept = j.at("intercept").get<double>();
    if (!(file.model.intercept >= 0.0)) {
      throw ValidationError("model intercept must be >= 0");
    }
    if (auto meta = j.find("metadata"); meta != j.end()) {
      file.metadata.rmse = meta->value("rmse", 0.0);
      file.metadata.relative_error_midpoint =
          meta->value("relative_error_midpoint", 0.0);
      file.metadata.n_samples = meta->value("n_samples", std::size_t{0});
      file.metadata.timestamp = meta->value("timestamp", std::string{});
      file.metadata.solver = meta->value("solver", std::string{});
      file.metadata.ridge_fallback = meta->value("ridge_fallback", false);
      file.metadata.intercept_refit = meta->value("intercept_refit", false);
    }
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model document: ") +
                          e.what());
  }
}

ModelFile read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);
  return read_model(in);
}

}  // namespace procwatt
