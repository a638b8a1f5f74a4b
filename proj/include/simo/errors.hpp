#pragma once

#include <stdexcept>
#include <string>

namespace simo {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape/arity violations in tensor ops.
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid configuration (specs, hyperparameters, schemas).
struct ConfigError : Error {
  using Error::Error;
};

/// Dataset / file-format / checkpoint problems.
struct DataError : Error {
  using Error::Error;
};

/// Non-finite values or other numeric failures during computation.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace simo
