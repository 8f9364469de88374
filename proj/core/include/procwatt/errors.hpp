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
#include <stdexcept>
#include <string>
#include <vector>

namespace procwatt {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: schema violations, out-of-range values, device
/// mismatches. Maps to CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failure to read or write a stream/file. Maps to CLI exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure (e.g. a solver that did not converge). Maps to
/// CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Distinct categories of trace-ingestion failures.
enum class TraceErrorKind {
  kSchema,
  kNonMonotoneTimestamp,
  kHistogramSum,
  kUtilizationBounds,
};

/// Trace validation failure carrying the offending record index
/// (0-based sample/row position as reported in the message).
class TraceError : public ValidationError {
 public:
  TraceError(TraceErrorKind kind, std::size_t record, const std::string& what)
      : ValidationError(what), kind_(kind), record_(record) {}

  TraceErrorKind kind() const { return kind_; }
  std::size_t record() const { return record_; }

 private:
  TraceErrorKind kind_;
  std::size_t record_;
};

/// Raised when the active-set solver exceeds its iteration budget.
/// Carries the best iterate found so far.
class NnlsConvergenceError : public NumericalError {
 public:
  NnlsConvergenceError(std::string what, std::vector<double> best_iterate,
                       int iterations)
      : NumericalError(std::move(what)),
        best_iterate_(std::move(best_iterate)),
        iterations_(iterations) {}

  const std::vector<double>& best_iterate() const { return best_iterate_; }
  int iterations() const { return iterations_; }

 private:
  std::vector<double> best_iterate_;
  int iterations_;
};

}  // namespace procwatt
