#pragma once

#include <stdexcept>
#include <string>

namespace superdisco {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or hyperparameter (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or insufficient data (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch between operands (CLI exit code 3).
class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

/// Label or index outside its valid range (CLI exit code 3).
class IndexError : public DataError {
 public:
  using DataError::DataError;
};

/// On-disk container does not match its declared format (CLI exit code 3).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// File could not be opened, read or written (CLI exit code 3).
class IoError : public DataError {
 public:
  using DataError::DataError;
};

/// API misuse, e.g. backward from a non-scalar root.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A primitive produced NaN or Inf (CLI exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss during optimization (CLI exit code 4).
class TrainingError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace superdisco
