#pragma once

#include <stdexcept>

namespace stlio {

/// Bad or inconsistent configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable or malformed input data (CLI exit code 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sensor stream does not cover the requested time span.
struct CoverageError : DataError {
  using DataError::DataError;
};

/// Registration could not be constrained (CLI exit code 4 when persistent).
struct DegeneracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stlio
