#pragma once

#include <stdexcept>
#include <string>

#include "coopseg/config.hpp"

COOPSEG_NAMESPACE_BEGIN

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or channel counts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Misuse of a recorded graph (reuse, non-scalar loss, ...).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered, or a numerical check failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data files and datasets.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

COOPSEG_NAMESPACE_END
