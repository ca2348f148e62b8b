#pragma once

#include <stdexcept>

namespace popgp {

// Arguments violate a documented precondition (dimension mismatch,
// out-of-range index, empty input).
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The computation cannot proceed numerically (factorization failure at
// maximum jitter, overflow of an exponential).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file on disk does not match its documented format. Messages carry the
// path, line number and offending field.
class ParseError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

}  // namespace popgp
