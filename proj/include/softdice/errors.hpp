#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace softdice {

/// Raised when a computed value is NaN/Inf. Carries the name of the
/// operation that produced it.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a caller violates a documented precondition.
class contract_error : public std::invalid_argument {
 public:
  explicit contract_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a second backward pass is requested through an operation
/// whose backward rule is only valid once.
class second_order_error : public std::runtime_error {
 public:
  explicit second_order_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by optimizers/trainers when parameters or gradients go non-finite.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace softdice
