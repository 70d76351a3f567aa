#pragma once

#include <stdexcept>
#include <string>

namespace alacs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

/// An operation was called on input that violates its precondition
/// (wrong channel count, mismatched dimensions, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A tuning parameter is out of range for the data it is applied to.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// No laser pixels survived extraction.
class EmptyLineError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  enum class Kind { Degenerate, BehindCamera, OutOfRange };

  GeometryError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class LocalizationError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace alacs
