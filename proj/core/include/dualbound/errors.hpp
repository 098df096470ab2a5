#pragma once

#include <stdexcept>
#include <string>

namespace dualbound {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or site-count mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A parameter lies outside its documented domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// The requested bound or schedule does not apply to the given input.
class NotApplicableError : public Error {
 public:
  using Error::Error;
};

// A numerical invariant broke during a computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dualbound
