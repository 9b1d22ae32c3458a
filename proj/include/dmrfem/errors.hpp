#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmrfem {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Structural problems with a triangulation (bad indices, overlap, flags).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A geometrically degenerate element.
class InvalidMesh : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class LinearSolveError : public Error {
 public:
  LinearSolveError(const std::string& what, double residual)
      : Error(what + " (relative residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Raised when an explicit/semi-explicit theta-scheme would violate its
/// step-size bound and the caller did not force the run.
class StabilityError : public Error {
 public:
  StabilityError(const std::string& what, double tau_max) : Error(what), tau_max_(tau_max) {}
  double tau_max() const noexcept { return tau_max_; }

 private:
  double tau_max_;
};

/// Non-finite values appeared during time stepping (blow-up proxy).
class OverflowError : public Error {
 public:
  OverflowError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Requested computation is outside what the implementation supports
/// (problem size, dimension).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmrfem
