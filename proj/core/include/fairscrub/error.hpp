#pragma once

#include <stdexcept>
#include <string>

namespace fairscrub {

// Root of every exception thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes (2 usage/config, 3 numerical, 4 I/O).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of matrices or networks do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside the mathematical domain of an operation
/// (non-positive temperature, label out of range, non-distribution input).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The API was called in an invalid order or with inconsistent arguments.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: synthetic data spec, fraction schedule, config file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A loss or parameter became NaN/Inf.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairscrub
