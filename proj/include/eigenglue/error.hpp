#pragma once

#include <stdexcept>
#include <string>

namespace eigenglue {

// Bad input: malformed files, violated preconditions, inconsistent topology.
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure failed to deliver (non-convergence, singular factorization).
// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace eigenglue
