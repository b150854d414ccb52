#pragma once

#include <stdexcept>
#include <string>

namespace tfq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated file payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Bad magic or dimensions in a file header.
class HeaderError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Supported format, unsupported version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Data that parses but violates a domain invariant (NaN sample, gene > 255, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class RangeError : public ParseError {
 public:
  using ParseError::ParseError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor or image shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Operation called on an object in the wrong state (e.g. unset fitness).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Failure inside a parallel evaluation run.
class RunError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tfq
