#pragma once

#include <stdexcept>
#include <string>

namespace quakesr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-domain input data (non-finite covariates, negative counts, bad shapes).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Model parameters outside the valid parameter space.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (prior bounds, engine settings, run configuration).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Corrupt, truncated or mismatched persisted state.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace quakesr
