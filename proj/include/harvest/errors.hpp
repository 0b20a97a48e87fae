#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace harvest {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-range model parameter.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function (x <= 0, b a pole, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Argument inside the domain but outside the supported working range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A closed form was requested for a component in the wrong regime.
class RegimeError : public Error {
 public:
  using Error::Error;
};

/// Root finding, quadrature or estimation failed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The request is well formed but has no implementation (e.g. no closed form).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// The upper bound needs a finite supremum of the discounted generator of Pi.
class BoundUnavailable : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Problem configuration could not be parsed; carries the offending field path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace harvest
