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

#include "procwatt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace procwatt {

namespace {

using ordered_json = nlohmann::ordered_json;

double utilization_bound(const PowerModel& truth) {
  return truth.device == DeviceKind::kCpu
             ? static_cast<double>(truth.n_cores)
             : 1.0;
}

void validate_plan(const PowerModel& truth, const SynthPlan& plan,
                   const NoiseSpec& noise) {
  if (plan.sample_period <= 0.0) {
    throw ValidationError("sample_period must be > 0");
  }
  if (!(noise.sd >= 0.0)) throw ValidationError("noise sd must be >= 0");
  if (noise.outlier_fraction < 0.0 || noise.outlier_fraction > 1.0) {
    throw ValidationError("outlier_fraction must lie in [0, 1]");
  }
  if (plan.workloads.empty()) {
    throw ValidationError("plan contains no workloads");
  }
  const double bound = utilization_bound(truth);
  for (const auto& w : plan.workloads) {
    if (w.name.empty()) throw ValidationError("workload without a name");
    if (w.repetitions < 1) {
      throw ValidationError("workload '" + w.name +
                            "': repetitions must be >= 1");
    }
    if (w.utilization.empty()) {
      throw ValidationError("workload '" + w.name +
                            "': empty utilization schedule");
    }
    for (double u : w.utilization) {
      if (!(u >= 0.0) || u > bound) {
        throw ValidationError("workload '" + w.name + "': utilization " +
                              std::to_string(u) + " outside [0, " +
                              std::to_string(bound) + "]");
      }
    }
  }
}

const WorkloadSpec& find_workload(const SynthPlan& plan,
                                  const std::string& name) {
  for (const auto& w : plan.workloads) {
    if (w.name == name) return w;
  }
  throw ValidationError("group references unknown workload '" + name + "'");
}

}  // namespace

double GaussianSampler::uniform() {
  // 53 random bits mapped to [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double GaussianSampler::operator()(double sd) {
  if (sd == 0.0) return 0.0;
  if (have_spare_) {
    have_spare_ = false;
    return spare_ * sd;
  }
  // Box-Muller; u1 is shifted into (0, 1] so the log stays finite.
  const double u1 =
      (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle) * sd;
}

SynthPlan read_synth_plan(std::istream& in) {
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("plan document is not valid JSON: ") +
                          e.what());
  }
  SynthPlan plan;
  try {
    plan.sample_period = j.value("sample_period", 1.0);
    for (const auto& w : j.at("workloads")) {
      WorkloadSpec spec;
      spec.name = w.at("name").get<std::string>();
      auto probs = w.at("histogram").get<std::vector<double>>();
      if (probs.size() != kNumClasses) {
        throw ValidationError("workload '" + spec.name +
                              "': histogram must have 8 entries");
      }
      std::array<double, kNumClasses> arr{};
      std::copy(probs.begin(), probs.end(), arr.begin());
      spec.histogram = InstructionHistogram::from_probabilities(arr, 1e-6);
      spec.utilization = w.at("utilization").get<std::vector<double>>();
      spec.repetitions = w.value("repetitions", 50);
      plan.workloads.push_back(std::move(spec));
    }
    if (auto groups = j.find("groups"); groups != j.end()) {
      plan.groups = groups->get<std::vector<std::vector<std::string>>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed plan document: ") + e.what());
  }
  return plan;
}

SynthPlan read_synth_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plan file: " + path);
  return read_synth_plan(in);
}

Trace generate_trace(const PowerModel& truth, const SynthPlan& plan,
                     const NoiseSpec& noise) {
  validate_plan(truth, plan, noise);

  // Normalize to the grouped form: an ungrouped plan is one
  // single-member group per workload.
  std::vector<std::vector<const WorkloadSpec*>> groups;
  if (plan.groups.empty()) {
    for (const auto& w : plan.workloads) groups.push_back({&w});
  } else {
    for (const auto& names : plan.groups) {
      if (names.empty()) throw ValidationError("empty workload group");
      std::vector<const WorkloadSpec*> group;
      for (const auto& name : names) {
        group.push_back(&find_workload(plan, name));
      }
      for (const auto* member : group) {
        if (member->utilization.size() != group.front()->utilization.size() ||
            member->repetitions != group.front()->repetitions) {
          throw ValidationError(
              "grouped workloads must share schedule length and "
              "repetitions: group containing '" +
              group.front()->name + "'");
        }
      }
      groups.push_back(std::move(group));
    }
  }

  GaussianSampler sampler(noise.seed);
  Trace trace;
  trace.header.device = truth.device;
  trace.header.n_cores = truth.n_cores;
  trace.header.sample_period = plan.sample_period;
  {
    std::ostringstream source;
    source << "procwatt synth rng=mt19937_64+box-muller seed=" << noise.seed
           << " sd=" << noise.sd;
    if (noise.outlier_fraction > 0.0) {
      source << " outlier_fraction=" << noise.outlier_fraction;
    }
    trace.header.source = source.str();
  }

  std::size_t index = 0;
  for (const auto& group : groups) {
    const std::size_t levels = group.front()->utilization.size();
    const int reps = group.front()->repetitions;
    for (std::size_t level = 0; level < levels; ++level) {
      for (int rep = 0; rep < reps; ++rep) {
        NodeSample s;
        s.timestamp = static_cast<double>(index) * plan.sample_period;
        for (const auto* member : group) {
          ProcessSample p;
          p.pid = member->name;
          p.utilization = member->utilization[level];
          p.histogram = member->histogram;
          p.timestamp = s.timestamp;
          s.processes.push_back(std::move(p));
        }
        double power = predict_node_power(s, truth);
        if (noise.sd > 0.0) {
          double draw = sampler(noise.sd);
          if (noise.outlier_fraction > 0.0 &&
              sampler.uniform() < noise.outlier_fraction) {
            draw *= 10.0;
          }
          power += draw;
        }
        // A draw may drag a near-idle node nonpositive; the trace
        // schema requires strictly positive power.
        s.measured_power = std::max(power, 1e-9);
        trace.samples.push_back(std::move(s));
        ++index;
      }
    }
  }
  return trace;
}

std::map<std::string, double> oracle_attribution(const PowerModel& truth,
                                                 const NodeSample& s) {
  std::map<std::string, double> watts;
  for (const auto& p : s.processes) {
    watts[p.pid] += predict_process_power(p, truth);
  }
  return watts;
}

}  // namespace procwatt
