#pragma once

#include <stdexcept>
#include <string>

namespace membrane {

/// Raised when an operation is called outside its documented domain.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative solve that did not reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double achieved_residual)
      : std::runtime_error(what + " (achieved relative residual " +
                           std::to_string(achieved_residual) + ")"),
        residual_(achieved_residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Numerical integration that failed its error target.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double error_estimate)
      : std::runtime_error(what + " (error estimate " +
                           std::to_string(error_estimate) + ")"),
        estimate_(error_estimate) {}

  double error_estimate() const noexcept { return estimate_; }

 private:
  double estimate_;
};

}  // namespace membrane
