#pragma once

#include <stdexcept>
#include <string>

namespace ldanet {

/// Dimension or layout mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Precondition violated by user-supplied data (empty class, too few samples, ...).
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite or otherwise unusable numerical result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factorization failed even after the diagonal was ridged.
class SingularMatrixError : public NumericalError {
 public:
  SingularMatrixError(const std::string& what, double ridge)
      : NumericalError(what + " (ridge " + std::to_string(ridge) + ")"), ridge_(ridge) {}

  double ridge() const noexcept { return ridge_; }

 private:
  double ridge_;
};

/// File or dataset problems: missing files, bad PNGs, label values out of range.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ldanet
