#pragma once

#include <stdexcept>
#include <string>

namespace atnf {

// Every library failure derives from Error; the CLI maps each kind to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Missing, malformed or untrained model state.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in the wrong order (backward before forward, phase ordering).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed input files.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace atnf
