#pragma once

#include <stdexcept>
#include <string>

namespace ionkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or invariant violated by a caller-supplied value.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Time integration could not complete (step underflow, norm drift, ...).
class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver or optimizer did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace ionkit
