#pragma once

#include <stdexcept>
#include <string>

namespace eqtsp {

/// Input text could not be understood (TSPLIB files, config files, checkpoints).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input that asks for something this library does not support.
class UnsupportedFormat : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All points coincide, so no normalization is possible.
class DegenerateInstance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was invoked in a state where it cannot proceed
/// (all-masked softmax, disconnected loss, exhausted decoding).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The exhaustive oracle was asked for an instance it refuses to enumerate.
class OracleSizeExceeded : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Checkpoint does not match the architecture the caller expects.
class ModelMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eqtsp
