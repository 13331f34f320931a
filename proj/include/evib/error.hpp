#pragma once

#include <stdexcept>
#include <string>

namespace evib {

// Base of every error raised by the library. The CLI maps subclasses to
// process exit codes (config 2, data 3, numerical 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Misuse of an API contract (e.g. backward from a non-scalar root).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace evib
