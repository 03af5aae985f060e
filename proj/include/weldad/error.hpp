#pragma once

#include <stdexcept>
#include <string>

namespace weldad {

// Exception hierarchy. The CLI maps each family onto a fixed exit code
// (see docs/formats.md).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor or signal dimensions that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong lifecycle state (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Malformed files, schema violations, label-contract violations.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or undefined numeric results.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace weldad
