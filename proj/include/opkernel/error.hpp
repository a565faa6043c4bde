#pragma once

#include <stdexcept>
#include <string>

namespace opk {

/// Operand shapes do not fit together (vector lengths, block sizes, indices).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input is well-formed but violates a mathematical precondition:
/// a non-Hermitian kernel, a non-p.d. kernel, a non-contraction, an invalid POVM.
class ValidationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A kernel failed the positive-definiteness gate.
class NotPositiveDefinite : public ValidationError {
 public:
  NotPositiveDefinite(const std::string& what, double min_eig)
      : ValidationError(what), min_eig_(min_eig) {}
  double min_eig() const noexcept { return min_eig_; }

 private:
  double min_eig_;
};

/// A construction completed but a certified residual exceeded its bound.
class ToleranceError : public std::runtime_error {
 public:
  ToleranceError(const std::string& what, double residual, double bound)
      : std::runtime_error(what), residual_(residual), bound_(bound) {}
  double residual() const noexcept { return residual_; }
  double bound() const noexcept { return bound_; }

 private:
  double residual_;
  double bound_;
};

/// Malformed input file (JSON syntax, schema).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace opk
