#pragma once

#include <stdexcept>
#include <string>

namespace cfp {

/// Requested problem size exceeds what the exact (enumerating) code paths allow.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input data (files, distributions, transition tables).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical propagation failed to meet its accuracy contract.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cfp
