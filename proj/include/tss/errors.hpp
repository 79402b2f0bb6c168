#pragma once

#include <stdexcept>
#include <string>

namespace tss {

// Precondition violated by an argument (shape, length, range).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// SI-SNR / SDR asked for a reference that is identically zero.
class UndefinedTargetError : public DomainError {
 public:
  using DomainError::DomainError;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf surfaced from a numeric routine (training, gradients).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Object used before it was ready (e.g. inference on an untrained model).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace tss
