#pragma once

#include <stdexcept>
#include <string>

namespace mrw {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the admissible range of an operation (bad level, alpha
// outside a transform domain, nonpositive mean, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Model structure violates a requirement (reducible or periodic chain,
// rows not stochastic, affine log-eigenvalue, non-lattice law for the DP).
class StructuralError : public Error {
 public:
  using Error::Error;
};

// An iterative numerical method failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace mrw
