#pragma once

#include <stdexcept>
#include <string>

namespace nips {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, bad dimensions, infeasible starting points.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Parameters outside their admissible range (stepsize window, unknown kinds).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The constraint set of a projection is empty.
class EmptySetError : public Error {
 public:
  using Error::Error;
};

/// An iterative routine failed to reach its tolerance.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Raised by brute-force oracles when the grid never touches the domain of g.
class OracleError : public Error {
 public:
  using Error::Error;
};

}  // namespace nips
