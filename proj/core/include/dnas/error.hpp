// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dnas {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree, or an index/width is out of range for a shape.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration. `line()` is the 1-based source line when the value
// came from a config file, 0 otherwise.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Malformed input data (dataset rows, labels).
class DataError : public Error {
 public:
  using Error::Error;
};

// Argument outside a function's mathematical domain (log of a non-positive).
class DomainError : public Error {
 public:
  using Error::Error;
};

// The engine produced a NaN or Inf.
class EngineError : public Error {
 public:
  using Error::Error;
};

class LatencyTableError : public Error {
 public:
  using Error::Error;
};

class ScheduleError : public Error {
 public:
  using Error::Error;
};

// An internal structural invariant was violated.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace dnas
