#pragma once

#include <stdexcept>
#include <string>

namespace optoent {

/// Invalid user input: parameters, configs, unknown identifiers.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown (integrator, non-physical state, precision).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonPhysicalCM : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NoRoot : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WindowTooShort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace optoent
