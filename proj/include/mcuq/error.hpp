#pragma once

#include <stdexcept>
#include <string>

namespace mcuq {

/// Raised when a numerical procedure cannot produce a usable result
/// (divergence, singular Gram matrix, non-convergence). Input validation
/// failures use std::invalid_argument instead.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, long iteration = -1)
      : std::runtime_error(what), iteration_(iteration) {}

  /// Iteration at which the failure was detected, or -1 when not iterative.
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace mcuq
