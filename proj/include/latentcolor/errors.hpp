#pragma once

#include <stdexcept>
#include <string>

namespace latentcolor {

// Base for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or image dimensions do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameters or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem or decode failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Input data violates a structural invariant (e.g. gaps in a clip).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or a failed matrix factorization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Checkpoint sidecar is unreadable or structurally wrong.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Checkpoint was written by an incompatible format version.
class IncompatibleCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace latentcolor
