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

#include <cstddef>
#include <vector>

#include "procwatt/model.hpp"

namespace procwatt {

/// Stacked regression observations: one feature row and one measured
/// power target per node sample. The sigma assignment and core count
/// the rows were built under travel with the matrix so the fitted
/// model is usable as-is.
struct DesignMatrix {
  std::vector<FeatureVector> rows;
  std::vector<double> targets;  ///< measured node power, watts
  DeviceKind device = DeviceKind::kCpu;
  SigmaAssignment sigma = SigmaAssignment::for_device(DeviceKind::kCpu);
  int n_cores = 1;
};

/// Result of a fit: the model plus quality metrics and residuals.
struct FitReport {
  PowerModel model;
  ModelMetadata metadata;
  std::vector<double> residuals;  ///< target - prediction, per row
};

/// Metrics of an existing model against a dataset. The midpoint is
/// (max(target) + min(target)) / 2 and the relative error is
/// 100 * rmse / midpoint.
struct FitMetrics {
  double rmse = 0;
  double relative_error_midpoint = 0;  ///< percent
  std::vector<double> residuals;
};

FitMetrics compute_metrics(const PowerModel& model, const DesignMatrix& d);

/// Ordinary least squares over [X | 1] via normal equations with a
/// rank-revealing pivoted Cholesky. Rank-deficient designs fall back to
/// a small ridge (lambda = 1e-8 * trace(X^T X) / n_features) on the
/// feature block, flagged in the metadata; a class never exercised in
/// the data gets weight exactly 0. A negative unconstrained intercept
/// is refit at the intercept >= 0 boundary and flagged.
FitReport fit_ols(const DesignMatrix& d);

/// Non-negative least squares (gamma >= 0) via the Lawson-Hanson
/// active-set algorithm, with the intercept profiled out by centering
/// and refit as a constrained column if it comes out negative. Throws
/// NnlsConvergenceError past max_iterations (default 10 * n_features).
FitReport fit_nnls(const DesignMatrix& d, int max_iterations = 0);

/// Generic solver results for arbitrary feature counts; the 8-class
/// fitters above wrap these.
struct GeneralFit {
  std::vector<double> weights;
  double intercept = 0;
  bool ridge_fallback = false;
  bool intercept_refit = false;
  int iterations = 0;
};

GeneralFit solve_ols(const std::vector<std::vector<double>>& rows,
                     const std::vector<double>& targets);

GeneralFit solve_nnls(const std::vector<std::vector<double>>& rows,
                      const std::vector<double>& targets,
                      int max_iterations = 0);

/// Sum of squared residuals of (weights, intercept) on the given data.
double sum_squared_residuals(const std::vector<std::vector<double>>& rows,
                             const std::vector<double>& targets,
                             const std::vector<double>& weights,
                             double intercept);

}  // namespace procwatt
