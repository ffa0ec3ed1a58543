#pragma once

#include <stdexcept>
#include <string>

namespace selfgnn {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing input data (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or solver failures (CLI exit code 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace selfgnn
