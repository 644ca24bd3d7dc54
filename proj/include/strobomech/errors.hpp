#pragma once

#include <stdexcept>
#include <string>

namespace strobomech {

// Invalid mathematical input: non-physical covariance, singular limit, etc.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller misuse: wrong mode count, negative durations, mismatched sizes.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative solver ran out of iterations.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, long iterations)
      : std::runtime_error(what + " (residual " + std::to_string(residual) +
                           " after " + std::to_string(iterations) + " iterations)"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  long iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  long iterations_;
};

// Integration produced a non-physical state; usually the step is too large.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A state that the model guarantees cannot occur did occur.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace strobomech
