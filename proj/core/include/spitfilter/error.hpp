// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace spitfilter {

/// Base of every error raised by the library. Input-class errors (bad
/// parameters, malformed data) derive from InputError so callers can tell
/// them apart from internal failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid model construction (non-positive or equal rates, bad samples).
class ModelError : public InputError {
 public:
  using InputError::InputError;
};

/// A duration or increment outside the model's support.
class RejectedInputError : public InputError {
 public:
  using InputError::InputError;
};

/// The requested operation is not available for this kind of model.
class UnsupportedModelError : public InputError {
 public:
  using InputError::InputError;
};

class FitError : public InputError {
 public:
  using InputError::InputError;
};

/// Out-of-range accuracy, cost or optimizer parameters.
class ParameterError : public InputError {
 public:
  using InputError::InputError;
};

/// A formula evaluated outside its mathematical domain (e.g. kappa of the wrong sign).
class DomainError : public InputError {
 public:
  using InputError::InputError;
};

/// Update of a test that already reached a verdict.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Request/completion sequencing violated (completion for a blocked or unknown call).
class ProtocolError : public InputError {
 public:
  using InputError::InputError;
};

class FormatError : public InputError {
 public:
  using InputError::InputError;
};

class LabelingError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace spitfilter
