#pragma once

#include <stdexcept>
#include <string>

namespace steval {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant (bad file content, bad arguments).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or network failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace steval
