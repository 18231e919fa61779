#pragma once

#include <stdexcept>
#include <string>

namespace survival {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Probabilities that are not probabilities, negative budgets, bad layouts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Table or policy dimensions that do not fit the model they are used with.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation that is not defined for the given model kind.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

/// Raised when no policy meets a CMDP budget.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double min_violation)
      : Error(what), min_violation_(min_violation) {}
  double min_violation() const { return min_violation_; }

 private:
  double min_violation_;
};

/// Malformed config or data file; carries the offending line and field.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, std::string field)
      : Error(format(what, line, field)), line_(line), field_(std::move(field)) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  static std::string format(const std::string& what, int line, const std::string& field) {
    std::string msg = what;
    if (line > 0) msg += " (line " + std::to_string(line) + ")";
    if (!field.empty()) msg += " [field '" + field + "']";
    return msg;
  }
  int line_;
  std::string field_;
};

}  // namespace survival
