#pragma once

#include <stdexcept>
#include <string>

namespace neurospect {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument or configuration value violates a precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data does not match the expected schema (missing columns, wrong counts).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A value could not be parsed or is out of its domain.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Tensor or layer shapes do not chain.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Serialized payload failed a version, checksum, or fingerprint check.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// A stateful object was used out of order (e.g. apply before fit).
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace neurospect
