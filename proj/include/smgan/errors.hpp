#pragma once

#include <stdexcept>
#include <string>

namespace smgan {

/// Shape disagreement between tensors (reports both shapes in the message).
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument value (bad factor, empty reduction, out-of-range label...).
class ArgumentError : public std::runtime_error {
 public:
  explicit ArgumentError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Caller violated an API contract (non-scalar backward root, train-mode
/// generator handed to a per-sample Jacobian, unnormalized classifier output).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Inconsistent network/experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input outside the numerical domain of an operation (e.g. strongly
/// indefinite matrix handed to a PSD square root).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem / serialization failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace smgan
