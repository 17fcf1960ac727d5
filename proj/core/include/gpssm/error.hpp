#pragma once

#include <stdexcept>
#include <string>

namespace gpssm {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A factorization failed or a non-finite value was produced.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (CSV, manifests, trajectories).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (unknown keys, out-of-range values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gpssm
