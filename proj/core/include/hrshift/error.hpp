#pragma once

#include <stdexcept>
#include <string>

namespace hrshift {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition on a caller-supplied argument.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be analysed: degenerate signals, rank-deficient
/// designs, malformed files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid or unsupported configuration document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Post-selection computation failed for every subject of a study.
class PosiFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace hrshift
