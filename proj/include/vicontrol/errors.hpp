// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace vicontrol {

/// Base class of all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested problem size exceeds the memory guard.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Coefficient field is not positive definite / not admissible.
class CoefficientError : public Error {
 public:
  using Error::Error;
};

/// Operands live on different meshes or have mismatching sizes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to reach its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> history = {})
      : Error(what), history_(std::move(history)) {}

  /// Residual (or objective) history up to the failure.
  [[nodiscard]] const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vicontrol
