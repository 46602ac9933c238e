#pragma once

#include <stdexcept>
#include <string>

namespace fkrig {

// Bad input data, configuration or arguments. The CLI maps these to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure inside a factorization, solve or optimizer. Exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidGrid : public InputError {
 public:
  using InputError::InputError;
};

class DimensionMismatch : public InputError {
 public:
  using InputError::InputError;
};

class DataError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class SizeCapExceeded : public InputError {
 public:
  using InputError::InputError;
};

class SingularMatrix : public NumericError {
 public:
  using NumericError::NumericError;
};

class NumericalBreakdown : public NumericError {
 public:
  using NumericError::NumericError;
};

class RankDeficientBasis : public NumericError {
 public:
  using NumericError::NumericError;
};

class NotPositiveDefinite : public NumericError {
 public:
  using NumericError::NumericError;
};

class OptimFailed : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace fkrig
