/*
 * Copyright 2026 The ehsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef EHSGD_ERROR_HPP_
#define EHSGD_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace ehsgd {

enum class ErrorKind {
  kInvalidModel,
  kDimensionMismatch,
  kNonConvergence,
  kInvalidSpec,
  kMissingGap,
  kStarvationDetected,
  kInvalidWeights,
  kPremiseViolated,
  kParseError,
  kValidationError,
  kInvariantViolation,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidModel: return "InvalidModel";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kNonConvergence: return "NonConvergence";
    case ErrorKind::kInvalidSpec: return "InvalidSpec";
    case ErrorKind::kMissingGap: return "MissingGap";
    case ErrorKind::kStarvationDetected: return "StarvationDetected";
    case ErrorKind::kInvalidWeights: return "InvalidWeights";
    case ErrorKind::kPremiseViolated: return "PremiseViolated";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kValidationError: return "ValidationError";
    case ErrorKind::kInvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Config validation failure carrying the offending field path, e.g.
// "arrival.beta" or "arrivals[3].period".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(ErrorKind::kValidationError, field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace ehsgd

#endif  // EHSGD_ERROR_HPP_
