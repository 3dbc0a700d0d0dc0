#pragma once

#include <stdexcept>
#include <string>

namespace cxrseg {

/// Base class for every error raised by the library. The `kind()` string is
/// stable and used by the CLI to build machine-parsable failure lines.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept = 0;
};

/// Tensor extents or channel counts that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape"; }
};

/// API misuse: bad arguments, calling backward without a graph, etc.
class UsageError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "usage"; }
};

/// Inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

/// Missing, corrupt or inconsistent input files.
class DataError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "data"; }
};

/// Non-finite values detected during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numerical"; }
};

}  // namespace cxrseg
