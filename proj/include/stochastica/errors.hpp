#pragma once

#include <stdexcept>
#include <string>

namespace stochastica {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a structural invariant (shape, symmetry, consistency).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure broke down (non-finite state, instability, leakage).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace stochastica
