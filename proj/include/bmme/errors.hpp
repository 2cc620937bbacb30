#pragma once

#include <stdexcept>
#include <string>

namespace bmme {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class NegativeEntry : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation (y <= 0, beta
// outside [1, 2], delta <= 0, an iterate below its floor, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateBaseline : public Error {
 public:
  using Error::Error;
};

class BisectionFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bmme
