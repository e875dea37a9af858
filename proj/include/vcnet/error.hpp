#pragma once

#include <stdexcept>
#include <string>

namespace vcnet {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed CSV header or unreadable input schema.
struct SchemaError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct NotFoundError : Error {
  using Error::Error;
};

/// Design matrix without full column rank; message names the offending columns.
struct RankDeficientError : Error {
  using Error::Error;
};

/// A pipeline stage found an upstream artifact missing.
struct MissingArtifactError : Error {
  using Error::Error;
};

/// A required input file is absent or unreadable.
struct InputError : Error {
  using Error::Error;
};

struct ConvergenceError : Error {
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual(residual) {}
  double residual;
};

}  // namespace vcnet
