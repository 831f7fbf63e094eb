#pragma once

#include <stdexcept>
#include <string>

namespace ltk {

/// Base class of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (unknown ids, bad shapes, schema violations).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A batch evaluation would exceed the attached function-evaluation budget.
/// The batch is rejected as a whole; no evaluations are charged.
class BudgetExhausted : public Error {
 public:
  BudgetExhausted(long used, long requested, long budget)
      : Error("function-evaluation budget exhausted: used " + std::to_string(used) + " + requested " +
              std::to_string(requested) + " > budget " + std::to_string(budget)),
        used_(used), requested_(requested), budget_(budget) {}

  long used() const noexcept { return used_; }
  long requested() const noexcept { return requested_; }
  long budget() const noexcept { return budget_; }

 private:
  long used_;
  long requested_;
  long budget_;
};

/// Corrupt or inconsistent persisted artifact (checkpoint, cache, state file).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace ltk
