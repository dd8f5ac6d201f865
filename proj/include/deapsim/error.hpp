// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace deapsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (hyperparameters, flags, search spaces).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text. `line()` is 1-based, or 0 when no line applies.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// A simulation invariant was violated or the run cannot proceed.
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace deapsim
