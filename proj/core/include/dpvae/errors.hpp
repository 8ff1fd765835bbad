#pragma once

#include <stdexcept>
#include <string>

namespace dpvae {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// log / division applied outside the operand's domain.
class DomainError : public Error {
 public:
  DomainError(const std::string& op, double operand)
      : Error(op + ": operand " + std::to_string(operand) + " outside domain"), operand_(operand) {}

  double operand() const noexcept { return operand_; }

 private:
  double operand_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A function under finite-difference evaluation returned a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class NumericAbort : public Error {
 public:
  NumericAbort(const std::string& what, long iteration) : Error(what), iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace dpvae
