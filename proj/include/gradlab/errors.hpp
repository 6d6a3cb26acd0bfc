#ifndef GRADLAB_ERRORS_HPP
#define GRADLAB_ERRORS_HPP

#include <limits>
#include <stdexcept>
#include <string>

namespace gradlab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments violate a documented precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A field was evaluated outside the region where it is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative root solve hit its iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A sparse linear solve failed or did not reach its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what,
              double condition_estimate = std::numeric_limits<double>::infinity())
      : Error(what + " (condition estimate " + std::to_string(condition_estimate) + ")"),
        condition_estimate_(condition_estimate) {}
  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// The stationary density computation failed.
class StationarityError : public Error {
 public:
  using Error::Error;
};

/// LV does not drop below the threshold anywhere on the search range.
class LyapunovFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace gradlab

#endif  // GRADLAB_ERRORS_HPP
