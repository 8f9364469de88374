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

#include "procwatt/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace procwatt {

namespace {

// Symmetric k x k matrix in row-major storage.
class SymMatrix {
 public:
  explicit SymMatrix(std::size_t k) : k_(k), data_(k * k, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data_[i * k_ + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * k_ + j]; }
  std::size_t size() const { return k_; }

 private:
  std::size_t k_;
  std::vector<double> data_;
};

// Solves G x = b for symmetric positive semidefinite G by Cholesky
// decomposition. Pivots that fall below a relative tolerance are
// treated as dead: the corresponding coefficient is fixed to 0.
// Returns true when every pivot was usable (full rank).
bool solve_spsd(const SymMatrix& G, const std::vector<double>& b,
                std::vector<double>& x) {
  const std::size_t k = G.size();
  SymMatrix L(k);
  std::vector<bool> dead(k, false);

  double max_diag = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    max_diag = std::max(max_diag, std::abs(G.at(i, i)));
  }
  const double tol = 1e-13 * std::max(max_diag, 1e-300);

  bool full_rank = true;
  for (std::size_t i = 0; i < k; ++i) {
    double d = G.at(i, i);
    for (std::size_t p = 0; p < i; ++p) d -= L.at(i, p) * L.at(i, p);
    if (d <= tol) {
      dead[i] = true;
      full_rank = false;
      continue;
    }
    L.at(i, i) = std::sqrt(d);
    for (std::size_t j = i + 1; j < k; ++j) {
      double s = G.at(j, i);
      for (std::size_t p = 0; p < i; ++p) s -= L.at(j, p) * L.at(i, p);
      L.at(j, i) = dead[j] ? 0.0 : s / L.at(i, i);
    }
  }

  // Forward substitution L z = b, then back substitution L^T x = z.
  std::vector<double> z(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (dead[i]) continue;
    double s = b[i];
    for (std::size_t p = 0; p < i; ++p) s -= L.at(i, p) * z[p];
    z[i] = s / L.at(i, i);
  }
  x.assign(k, 0.0);
  for (std::size_t ir = k; ir-- > 0;) {
    if (dead[ir]) continue;
    double s = z[ir];
    for (std::size_t j = ir + 1; j < k; ++j) s -= L.at(j, ir) * x[j];
    x[ir] = s / L.at(ir, ir);
  }
  return full_rank;
}

struct NormalEquations {
  SymMatrix gram;
  std::vector<double> rhs;
  NormalEquations(std::size_t k) : gram(k), rhs(k, 0.0) {}
};

// Accumulates X^T X and X^T y over (optionally mean-centered) columns.
NormalEquations accumulate(const std::vector<std::vector<double>>& rows,
                           const std::vector<double>& targets,
                           const std::vector<double>* col_means,
                           double target_mean) {
  const std::size_t k = rows.empty() ? 0 : rows.front().size();
  NormalEquations eq(k);
  std::vector<double> centered(k);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < k; ++i) {
      centered[i] = col_means ? rows[r][i] - (*col_means)[i] : rows[r][i];
    }
    const double y = targets[r] - target_mean;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i; j < k; ++j) {
        eq.gram.at(i, j) += centered[i] * centered[j];
      }
      eq.rhs[i] += centered[i] * y;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < i; ++j) eq.gram.at(i, j) = eq.gram.at(j, i);
  }
  return eq;
}

void validate_rows(const std::vector<std::vector<double>>& rows,
                   const std::vector<double>& targets,
                   std::size_t min_samples) {
  if (rows.size() != targets.size()) {
    throw ValidationError("feature row count differs from target count");
  }
  if (rows.size() < min_samples) {
    throw ValidationError("need at least " + std::to_string(min_samples) +
                          " samples, got " + std::to_string(rows.size()));
  }
  const std::size_t k = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != k) {
      throw ValidationError("ragged feature row at index " +
                            std::to_string(r));
    }
    for (double v : rows[r]) {
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite feature at row " +
                              std::to_string(r));
      }
    }
    if (!std::isfinite(targets[r])) {
      throw ValidationError("non-finite target at row " + std::to_string(r));
    }
  }
}

// Lawson-Hanson active set on precomputed normal equations:
// min ||A x - z||^2 s.t. x >= 0, expressed through G = A^T A, c = A^T z.
// Every passive-set solve counts against the iteration budget.
struct ActiveSetResult {
  std::vector<double> x;
  int iterations = 0;
};

ActiveSetResult nnls_active_set(const SymMatrix& G,
                                const std::vector<double>& c,
                                int max_iterations) {
  const std::size_t k = G.size();
  std::vector<double> x(k, 0.0);
  std::vector<bool> passive(k, false);
  std::vector<bool> rejected(k, false);
  int iterations = 0;

  double scale = 0.0;
  for (double v : c) scale = std::max(scale, std::abs(v));
  const double dual_tol = 1e-12 * std::max(scale, 1e-300);

  auto solve_passive = [&](std::vector<double>& s) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < k; ++i) {
      if (passive[i]) idx.push_back(i);
    }
    SymMatrix sub(idx.size());
    std::vector<double> rhs(idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) {
      rhs[a] = c[idx[a]];
      for (std::size_t b = 0; b < idx.size(); ++b) {
        sub.at(a, b) = G.at(idx[a], idx[b]);
      }
    }
    std::vector<double> sol;
    solve_spsd(sub, rhs, sol);
    s.assign(k, 0.0);
    for (std::size_t a = 0; a < idx.size(); ++a) s[idx[a]] = sol[a];
  };

  while (true) {
    // Dual (negative gradient) w = c - G x.
    std::size_t best = k;
    double best_w = dual_tol;
    for (std::size_t i = 0; i < k; ++i) {
      if (passive[i] || rejected[i]) continue;
      double w = c[i];
      for (std::size_t j = 0; j < k; ++j) w -= G.at(i, j) * x[j];
      if (w > best_w) {
        best_w = w;
        best = i;
      }
    }
    if (best == k) break;  // KKT satisfied

    passive[best] = true;
    bool first_solve = true;
    std::vector<double> s;
    while (true) {
      if (++iterations > max_iterations) {
        throw NnlsConvergenceError(
            "active-set solver exceeded " + std::to_string(max_iterations) +
                " iterations",
            x, iterations - 1);
      }
      solve_passive(s);
      if (first_solve && s[best] <= 0.0) {
        // The candidate column is (near) dependent on the passive set;
        // drop it and bar it until the iterate changes again.
        passive[best] = false;
        rejected[best] = true;
        break;
      }
      first_solve = false;

      double alpha = std::numeric_limits<double>::infinity();
      std::size_t limiting = k;
      for (std::size_t i = 0; i < k; ++i) {
        if (!passive[i] || s[i] > 0.0) continue;
        double step = x[i] / (x[i] - s[i]);
        if (step < alpha) {
          alpha = step;
          limiting = i;
        }
      }
      if (limiting == k) {
        // Fully feasible passive solution; accept it.
        for (std::size_t i = 0; i < k; ++i) x[i] = passive[i] ? s[i] : 0.0;
        std::fill(rejected.begin(), rejected.end(), false);
        break;
      }
      for (std::size_t i = 0; i < k; ++i) {
        if (passive[i]) x[i] += alpha * (s[i] - x[i]);
      }
      x[limiting] = 0.0;
      passive[limiting] = false;
      for (std::size_t i = 0; i < k; ++i) {
        if (passive[i] && x[i] <= 0.0) {
          x[i] = 0.0;
          passive[i] = false;
        }
      }
      std::fill(rejected.begin(), rejected.end(), false);
    }
  }
  return {std::move(x), iterations};
}

std::vector<double> column_means(const std::vector<std::vector<double>>& rows) {
  const std::size_t k = rows.front().size();
  std::vector<double> means(k, 0.0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < k; ++i) means[i] += row[i];
  }
  for (auto& m : means) m /= static_cast<double>(rows.size());
  return means;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

}  // namespace

double sum_squared_residuals(const std::vector<std::vector<double>>& rows,
                             const std::vector<double>& targets,
                             const std::vector<double>& weights,
                             double intercept) {
  double ssr = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double pred = intercept;
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      pred += weights[i] * rows[r][i];
    }
    const double res = targets[r] - pred;
    ssr += res * res;
  }
  return ssr;
}

GeneralFit solve_ols(const std::vector<std::vector<double>>& rows,
                     const std::vector<double>& targets) {
  const std::size_t k = rows.empty() ? 0 : rows.front().size();
  validate_rows(rows, targets, k + 1);

  // Augment with the constant-1 intercept column.
  auto fit_with_intercept_column = [&](bool include_intercept) {
    const std::size_t cols = k + (include_intercept ? 1 : 0);
    NormalEquations eq(cols);
    std::vector<double> aug(cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy(rows[r].begin(), rows[r].end(), aug.begin());
      if (include_intercept) aug[k] = 1.0;
      for (std::size_t i = 0; i < cols; ++i) {
        for (std::size_t j = i; j < cols; ++j) {
          eq.gram.at(i, j) += aug[i] * aug[j];
        }
        eq.rhs[i] += aug[i] * targets[r];
      }
    }
    for (std::size_t i = 0; i < cols; ++i) {
      for (std::size_t j = 0; j < i; ++j) eq.gram.at(i, j) = eq.gram.at(j, i);
    }

    std::vector<double> solution;
    bool full_rank = solve_spsd(eq.gram, eq.rhs, solution);
    if (!full_rank) {
      // Minimum-norm style fallback: small ridge over the feature block
      // only; columns with no signal at all still resolve to weight 0.
      double feature_trace = 0.0;
      for (std::size_t i = 0; i < k; ++i) feature_trace += eq.gram.at(i, i);
      const double lambda =
          1e-8 * feature_trace / std::max<std::size_t>(k, 1);
      if (lambda > 0.0) {
        for (std::size_t i = 0; i < k; ++i) eq.gram.at(i, i) += lambda;
        solve_spsd(eq.gram, eq.rhs, solution);
      }
    }
    return std::pair{solution, !full_rank};
  };

  auto [solution, deficient] = fit_with_intercept_column(true);
  GeneralFit fit;
  fit.ridge_fallback = deficient;
  fit.weights.assign(solution.begin(), solution.begin() + k);
  fit.intercept = solution[k];

  if (fit.intercept < 0.0) {
    // The physically meaningful model has intercept >= 0; the constrained
    // optimum sits on the boundary, so refit the weights with it pinned.
    auto [refit, refit_deficient] = fit_with_intercept_column(false);
    fit.weights.assign(refit.begin(), refit.end());
    fit.intercept = 0.0;
    fit.intercept_refit = true;
    fit.ridge_fallback = fit.ridge_fallback || refit_deficient;
  }
  return fit;
}

GeneralFit solve_nnls(const std::vector<std::vector<double>>& rows,
                      const std::vector<double>& targets,
                      int max_iterations) {
  const std::size_t k = rows.empty() ? 0 : rows.front().size();
  validate_rows(rows, targets, k + 1);
  if (max_iterations <= 0) max_iterations = 10 * static_cast<int>(k);

  // Profile the unconstrained intercept out by centering: for any fixed
  // gamma the optimal intercept is mean(y) - mean(x) . gamma, so the
  // centered problem solves min over gamma >= 0 directly.
  const std::vector<double> means = column_means(rows);
  const double y_mean = mean(targets);
  NormalEquations centered = accumulate(rows, targets, &means, y_mean);

  GeneralFit fit;
  ActiveSetResult r = nnls_active_set(centered.gram, centered.rhs,
                                      max_iterations);
  fit.weights = r.x;
  fit.iterations = r.iterations;
  fit.intercept = y_mean;
  for (std::size_t i = 0; i < k; ++i) fit.intercept -= means[i] * r.x[i];

  if (fit.intercept < 0.0) {
    // Refit with the intercept as one more non-negative column.
    std::vector<std::vector<double>> aug_rows(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      aug_rows[i] = rows[i];
      aug_rows[i].push_back(1.0);
    }
    NormalEquations eq =
        accumulate(aug_rows, targets, nullptr, 0.0);
    ActiveSetResult aug =
        nnls_active_set(eq.gram, eq.rhs, max_iterations);
    fit.weights.assign(aug.x.begin(), aug.x.begin() + k);
    fit.intercept = aug.x[k];
    fit.iterations += aug.iterations;
    fit.intercept_refit = true;
  }
  return fit;
}

FitMetrics compute_metrics(const PowerModel& model, const DesignMatrix& d) {
  FitMetrics metrics;
  metrics.residuals.reserve(d.rows.size());
  double ssr = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < d.rows.size(); ++r) {
    double pred = model.intercept;
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      pred += model.gamma[i] * d.rows[r][i];
    }
    const double res = d.targets[r] - pred;
    metrics.residuals.push_back(res);
    ssr += res * res;
    lo = std::min(lo, d.targets[r]);
    hi = std::max(hi, d.targets[r]);
  }
  if (!metrics.residuals.empty()) {
    metrics.rmse =
        std::sqrt(ssr / static_cast<double>(metrics.residuals.size()));
    const double midpoint = (hi + lo) / 2.0;
    metrics.relative_error_midpoint =
        midpoint != 0.0 ? 100.0 * metrics.rmse / midpoint
                        : std::numeric_limits<double>::quiet_NaN();
  }
  return metrics;
}

namespace {

FitReport make_report(const DesignMatrix& d, const GeneralFit& fit,
                      const std::string& solver) {
  FitReport report;
  report.model.device = d.device;
  report.model.sigma = d.sigma;
  report.model.n_cores = d.n_cores;
  std::copy(fit.weights.begin(), fit.weights.end(),
            report.model.gamma.begin());
  report.model.intercept = fit.intercept;

  FitMetrics metrics = compute_metrics(report.model, d);
  report.residuals = std::move(metrics.residuals);
  report.metadata.rmse = metrics.rmse;
  report.metadata.relative_error_midpoint = metrics.relative_error_midpoint;
  report.metadata.n_samples = d.rows.size();
  report.metadata.solver = solver;
  report.metadata.ridge_fallback = fit.ridge_fallback;
  report.metadata.intercept_refit = fit.intercept_refit;
  return report;
}

std::vector<std::vector<double>> to_generic_rows(const DesignMatrix& d) {
  std::vector<std::vector<double>> rows;
  rows.reserve(d.rows.size());
  for (const auto& row : d.rows) {
    rows.emplace_back(row.begin(), row.end());
  }
  return rows;
}

constexpr std::size_t kMinFitSamples = 9;  // more rows than unknowns

}  // namespace

FitReport fit_ols(const DesignMatrix& d) {
  auto rows = to_generic_rows(d);
  validate_rows(rows, d.targets, kMinFitSamples);
  GeneralFit fit = solve_ols(rows, d.targets);
  return make_report(d, fit, "ols");
}

FitReport fit_nnls(const DesignMatrix& d, int max_iterations) {
  auto rows = to_generic_rows(d);
  validate_rows(rows, d.targets, kMinFitSamples);
  GeneralFit fit = solve_nnls(rows, d.targets, max_iterations);
  return make_report(d, fit, "nnls");
}

}  // namespace procwatt
