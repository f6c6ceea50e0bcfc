#pragma once

#include <stdexcept>
#include <string>

namespace ehrgmtl {

// Base class for every error raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shape mismatch in a numeric op.
struct DimensionError : Error {
  using Error::Error;
};

// Input data violates the documented schema (CSV layout, record shapes,
// incompatible graphs).
struct SchemaError : Error {
  using Error::Error;
};

// A cell or token could not be parsed.
struct ParseError : Error {
  using Error::Error;
};

// An operation precondition was violated.
struct ContractError : Error {
  using Error::Error;
};

// Invalid run configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Synthetic dataset calibration failed.
struct GenerationError : Error {
  using Error::Error;
};

}  // namespace ehrgmtl
