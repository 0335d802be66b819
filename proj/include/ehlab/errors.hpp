#pragma once

#include <stdexcept>

namespace ehlab {

/// Argument outside the mathematical domain of a function.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Parameters fall in a regime where the requested quantity does not exist.
struct RegimeError : std::logic_error {
  using std::logic_error::logic_error;
};

/// A numerical procedure failed to reach its accuracy target.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or violated precondition.
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace ehlab
