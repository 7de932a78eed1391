// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace muonvr {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible matrix dimensions.
class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

// An iterative routine exhausted its iteration budget.
class ConvergenceFailure : public Error {
 public:
  explicit ConvergenceFailure(const std::string& msg) : Error(msg) {}
};

// An iterate blew past its divergence guard.
class DivergenceDetected : public Error {
 public:
  explicit DivergenceDetected(const std::string& msg) : Error(msg) {}
};

// NaN or infinity showed up in optimizer state.
class NonFiniteState : public Error {
 public:
  explicit NonFiniteState(const std::string& msg) : Error(msg) {}
};

// Constructor arguments outside their allowed ranges.
class InvalidConstants : public Error {
 public:
  explicit InvalidConstants(const std::string& msg) : Error(msg) {}
};

// A trace lacks the per-step diagnostics a check needs.
class MissingDiagnostics : public Error {
 public:
  explicit MissingDiagnostics(const std::string& msg) : Error(msg) {}
};

// Input sequences fail the hypothesis of the inequality under test.
class PremiseViolated : public Error {
 public:
  explicit PremiseViolated(const std::string& msg) : Error(msg) {}
};

// Too few seeds for a statistically meaningful estimate.
class InsufficientSeeds : public Error {
 public:
  explicit InsufficientSeeds(const std::string& msg) : Error(msg) {}
};

// A fit window with too few usable points.
class DegenerateWindow : public Error {
 public:
  explicit DegenerateWindow(const std::string& msg) : Error(msg) {}
};

// Config text could not be parsed.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Parsed config carries inconsistent or out-of-range values.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Filesystem trouble while reading or writing run outputs.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace muonvr
