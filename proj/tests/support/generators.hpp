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

#include <random>
#include <string>

#include "procwatt/model.hpp"
#include "procwatt/trace.hpp"

// Seeded random instances for property-style tests.

namespace procwatt::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline InstructionHistogram random_histogram(Rng& rng, double idle_prob = 0.0) {
  if (idle_prob > 0.0 && uniform(rng, 0.0, 1.0) < idle_prob) {
    return InstructionHistogram::idle();
  }
  std::array<double, kNumClasses> raw{};
  double sum = 0.0;
  for (auto& p : raw) {
    p = uniform(rng, 0.0, 1.0);
    sum += p;
  }
  for (auto& p : raw) p /= sum;
  return InstructionHistogram::from_probabilities(raw, 1e-6);
}

inline PowerModel random_model(Rng& rng) {
  PowerModel m;
  m.device = uniform_int(rng, 0, 1) == 0 ? DeviceKind::kCpu : DeviceKind::kGpu;
  m.n_cores = m.device == DeviceKind::kCpu ? uniform_int(rng, 1, 256) : 1;
  m.sigma = SigmaAssignment::for_device(m.device);
  for (auto& g : m.gamma) g = uniform(rng, 0.0, 200.0);
  m.intercept = uniform(rng, 1.0, 400.0);
  return m;
}

inline ProcessSample random_process(Rng& rng, const PowerModel& m, double t,
                                    const std::string& pid) {
  ProcessSample p;
  p.pid = pid;
  p.timestamp = t;
  p.histogram = random_histogram(rng, 0.05);
  const double bound =
      m.device == DeviceKind::kCpu ? static_cast<double>(m.n_cores) : 1.0;
  p.utilization = uniform(rng, 0.0, bound);
  return p;
}

inline NodeSample random_node_sample(Rng& rng, const PowerModel& m, double t,
                                     int max_processes = 8) {
  NodeSample s;
  s.timestamp = t;
  const int count = uniform_int(rng, 0, max_processes);
  for (int i = 0; i < count; ++i) {
    s.processes.push_back(
        random_process(rng, m, t, "p" + std::to_string(i)));
  }
  s.measured_power = predict_node_power(s, m) + uniform(rng, -5.0, 5.0);
  if (s.measured_power <= 0.0) s.measured_power = 1.0;
  return s;
}

inline Trace random_trace(Rng& rng, const PowerModel& m, int n_samples = 0) {
  Trace trace;
  trace.header.device = m.device;
  trace.header.n_cores = m.n_cores;
  trace.header.sample_period = uniform(rng, 0.1, 2.0);
  trace.header.source = "test generator";
  if (n_samples == 0) n_samples = uniform_int(rng, 1, 20);
  double t = uniform(rng, 0.0, 10.0);
  for (int i = 0; i < n_samples; ++i) {
    trace.samples.push_back(random_node_sample(rng, m, t));
    t += uniform(rng, 0.5, 1.5) * trace.header.sample_period;
  }
  return trace;
}

}  // namespace procwatt::testing
