#pragma once

#include <stdexcept>
#include <string>

namespace agdc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value lies outside its admissible interval.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// An index (token id, timestep, position) is outside its table.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong state (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf or similar numerical failure.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Sequence longer than the model can attend over.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Mathematical domain violation (log of non-positive ratio etc).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or record.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace agdc
