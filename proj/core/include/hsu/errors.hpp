#pragma once

#include <stdexcept>
#include <string>

namespace hsu {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad shapes, out-of-range parameters, violated preconditions.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values in inputs or iterates.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A requested allocation exceeds the configured cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable files.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ArithmeticOverflowError : public Error {
 public:
  using Error::Error;
};

/// A per-class metric was requested for a label with no pixels.
class EmptyClassError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

}  // namespace hsu
