#pragma once

#include <stdexcept>
#include <string>

namespace evolmpnn {

/// Input that violates a documented contract (bad file, bad shape, bad flag value).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A NaN/Inf showed up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evolmpnn
