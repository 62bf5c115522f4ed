#pragma once

#include <stdexcept>
#include <string>

namespace hjlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed inconsistent arguments (dimension mismatch, bad counts).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Requested problem exceeds enumeration or quadrature capacity.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormulaUnavailableError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Fixed-point inversion of the characteristic map did not contract.
class NonContractionError : public Error {
 public:
  NonContractionError(const std::string& what, double quotient)
      : Error(what), quotient_(quotient) {}
  double empirical_quotient() const noexcept { return quotient_; }

 private:
  double quotient_;
};

}  // namespace hjlab
