#pragma once

#include <stdexcept>
#include <string>

namespace spopo {

/// Invalid configuration or argument values. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pump ratio at or above the oscillation threshold.
class AboveThresholdError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Missing, malformed or insufficient measurement data. Maps to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A covariance state that is not positive definite or violates the
/// uncertainty relation. Maps to exit code 4.
class PhysicalityError : public std::runtime_error {
 public:
  PhysicalityError(const std::string& what, double min_nu)
      : std::runtime_error(what), min_nu_(min_nu) {}

  /// Smallest symplectic eigenvalue when it could be computed, NaN otherwise.
  [[nodiscard]] double min_nu() const { return min_nu_; }

 private:
  double min_nu_;
};

}  // namespace spopo
