#pragma once

#include <stdexcept>
#include <string>

namespace truncgraph {

/// Malformed input: bad indices, inconsistent dimensions, unparsable files,
/// invalid configuration. The CLI maps this family to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a kernel (e.g. |sigma| too
/// close to 1, nonpositive variance). Treated as a validation failure.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure could not produce a result (failed factorization,
/// singular system). The CLI maps this family to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace truncgraph
