#pragma once

#include <stdexcept>
#include <string>

namespace unmix {

enum class ErrorKind {
  InvalidInput,  // dimension mismatch, bad option values
  DataFormat,    // malformed files, size mismatches
  Numerical,     // singular systems, non-positive variances
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what)
      : Error(ErrorKind::InvalidInput, what) {}
};

class DataFormatError : public Error {
 public:
  explicit DataFormatError(const std::string& what)
      : Error(ErrorKind::DataFormat, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::Numerical, what) {}
};

}  // namespace unmix
