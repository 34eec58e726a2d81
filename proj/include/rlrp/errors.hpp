#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rlrp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer extents do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of an operation (empty tensor, bad fraction...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced or encountered during a computation.
class NumericError : public Error {
 public:
  NumericError(const std::string& stage, std::size_t layer, const std::string& what)
      : Error(stage + " layer " + std::to_string(layer) + ": " + what), layer_(layer) {}

  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

/// A relevance rule met a denominator whose magnitude is below the configured guard.
class GuardedDenominatorError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Graph too large for the edge-level oracle, or otherwise structurally unusable.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Model / file errors.

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed header or document.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class VersionError : public IoError {
 public:
  using IoError::IoError;
};

class TruncatedBlobError : public IoError {
 public:
  using IoError::IoError;
};

/// Declared layer geometry is inconsistent with the blob or with neighbouring layers.
class ModelShapeError : public IoError {
 public:
  using IoError::IoError;
};

class NonFiniteWeightError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace rlrp
