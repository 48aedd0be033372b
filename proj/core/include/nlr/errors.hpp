#pragma once

#include <stdexcept>
#include <string>

namespace nlr {

/// Precondition violated by the caller (bad shape, out-of-range hyperparameter).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input is valid in form but numerically degenerate (zero norm, constant data).
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Operation requested against state that was never established.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A loss or parameter became NaN/Inf during training.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nlr
