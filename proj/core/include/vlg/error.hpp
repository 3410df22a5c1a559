#pragma once

#include <stdexcept>
#include <string>

namespace vlg {

// Base class for every error raised by the library. Each subclass maps to a
// stable CLI exit code (see tools/main.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor or edge-set extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid hyper-parameter or option combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Data that violates a documented invariant (intervals, labels, parses).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed binary or text payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Missing or unwritable file.
class PathError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace vlg
