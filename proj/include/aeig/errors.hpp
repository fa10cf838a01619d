#pragma once

#include <stdexcept>
#include <string>

namespace aeig {

// Incompatible tensor or grid extents.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A caller broke an API precondition (e.g. backward on a non-scalar).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad or unknown configuration value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File or directory could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN, divergence or non-convergence during a numerical procedure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aeig
