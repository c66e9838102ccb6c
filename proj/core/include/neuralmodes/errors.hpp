#pragma once

#include <stdexcept>
#include <string>

namespace nmodes {

/// Malformed input: bad files, inconsistent dimensions, violated preconditions.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced non-finite values or failed to converge.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nmodes
