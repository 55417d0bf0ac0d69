#pragma once

#include <stdexcept>
#include <string>

namespace rhrnet {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes are incompatible (matmul inner extents, elementwise args, ...).
struct DimensionError : Error {
  using Error::Error;
};

// An operation was called outside its documented domain (odd extent,
// non-scalar loss, train-mode reassembly, ...).
struct ContractError : Error {
  using Error::Error;
};

// Invalid model or training configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input file (WAV, manifest, config file).
struct ParseError : Error {
  using Error::Error;
};

// Signal unusable for the requested operation (all-silent, no valid frames).
struct DegenerateSignalError : Error {
  using Error::Error;
};

// Signal has too few frames for a windowed metric.
struct SignalTooShortError : Error {
  using Error::Error;
};

// Numeric failure while training (non-finite loss or gradient).
struct TrainingError : Error {
  using Error::Error;
};

// Checkpoint file cannot be loaded. kind() distinguishes the failure modes.
class CheckpointError : public Error {
 public:
  enum class Kind { BadMagic, VersionMismatch, Truncated, ShapeMismatch };

  CheckpointError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace rhrnet
