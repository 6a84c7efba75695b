#pragma once

#include <stdexcept>
#include <string>

namespace tkv {

// Shapes of the operands do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Empty vector, empty cache or empty stream where at least one element is required.
class EmptyInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument is well-shaped but outside the mathematical domain of the operation
// (non-finite entries, points outside the unit ball, bad tolerances).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Witness instance whose spike constant cannot separate the two bit cases.
class SeparationError : public DomainError {
 public:
  explicit SeparationError(const std::string& what)
      : DomainError("separation violated: " + what) {}
};

}  // namespace tkv
