#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes, counts, or structure tags that do not fit together.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument outside the domain an operation is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Segment durations that are not integer multiples of the step.
class AlignmentError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Non-finite values during time integration.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t segment)
      : Error(what), segment_(segment) {}
  std::size_t segment() const noexcept { return segment_; }

 private:
  std::size_t segment_;
};

/// Non-finite values inside a network forward pass or an optimizer loop.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  /// Layer index for forward passes, iteration index for training.
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Malformed documents and data files.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace nflow
