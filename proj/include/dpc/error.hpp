#pragma once

#include <stdexcept>
#include <string>

namespace dpc {

// Raised when an input violates an operation's documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a charge would push a ledger past its cap.
class BudgetExhausted : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

// The requested (p, q) pair cannot be met by the projection family at the
// requested c. Carries the smallest c that works.
class LshInfeasible : public PreconditionError {
 public:
  LshInfeasible(const std::string& what, double minimal_c)
      : PreconditionError(what), minimal_c_(minimal_c) {}
  double minimal_c() const { return minimal_c_; }

 private:
  double minimal_c_;
};

// An algorithm ran to completion without finding what it was asked for.
class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dpc
