#pragma once

#include <stdexcept>
#include <string>

namespace margin_phase {

// An iterative solver ran out of iterations before reaching its tolerance.
// Carries the last residual so callers can decide whether to retry.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Exact counting / enumeration exceeded its work budget.  The caller gets an
// explicit refusal, never an approximate count.
class BudgetExceededError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejection sampling used up its allotted tries without an accepted table.
class ExhaustedError : public std::runtime_error {
 public:
  ExhaustedError(const std::string& what, long long tries)
      : std::runtime_error(what), tries_(tries) {}
  long long tries() const { return tries_; }

 private:
  long long tries_;
};

}  // namespace margin_phase
