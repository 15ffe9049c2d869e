#pragma once

#include <stdexcept>
#include <string>

namespace blab {

// Input violates a documented precondition (bad shapes, unnormalized tables,
// out-of-range parameters). Maps to CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidDistribution : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A computation could not produce a finite answer (all-zero update row,
// every cluster excluded, ...). Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace blab
