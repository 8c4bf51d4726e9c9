#pragma once

#include <stdexcept>
#include <string>

namespace finsler {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Point outside a structure's domain, or a stencil that leaves it.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Requested feature beyond what the engine supports (e.g. jet order > 4).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Fundamental tensor singular or indefinite: the structure is not Finsler at the point.
class ConvexityError : public Error {
 public:
  using Error::Error;
};

/// Invalid arguments when building a structure (non-symmetric metric, Randers bound, ...).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// Singular expression evaluation (division by zero, log of non-positive, ...).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Finite-difference oracle cannot produce a trustworthy value.
class OracleError : public Error {
 public:
  using Error::Error;
};

/// Syntax or semantic error in a metric expression or metric file.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(format(what, line, column)), line_(line), column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, int line, int column) {
    return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
  }

  int line_;
  int column_;
};

}  // namespace finsler
