#pragma once

#include <stdexcept>
#include <string>

namespace dertariff {

/// Input data or configuration failed validation (exit code 2 in the CLI).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written (exit code 4 in the CLI).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No member of a tariff family raises the requested retailer surplus.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double max_revenue)
      : std::runtime_error(what), max_revenue_(max_revenue) {}

  /// Largest expected retailer surplus the family can attain.
  double max_revenue() const { return max_revenue_; }

 private:
  double max_revenue_;
};

/// An iterative solve hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two routes to the same closed-form quantity disagreed beyond tolerance.
class IdentityMismatch : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dertariff
