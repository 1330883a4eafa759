#pragma once

#include <stdexcept>
#include <string>

namespace recall {

/// Broad failure class. The CLI maps each class to a distinct exit code.
enum class ErrorClass {
  usage,      // bad arguments or configuration (exit 2)
  data,       // malformed or inconsistent input data (exit 3)
  numerical,  // the estimand is not computable for these inputs (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), class_(cls) {}

  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

#define RECALL_DEFINE_ERROR(Name, Class)                          \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what)                        \
        : Error(ErrorClass::Class, #Name ": " + what) {}          \
  }

RECALL_DEFINE_ERROR(ConfigError, usage);
RECALL_DEFINE_ERROR(MissingColumn, usage);
RECALL_DEFINE_ERROR(NonBinaryValue, data);
RECALL_DEFINE_ERROR(EmptyFile, data);
RECALL_DEFINE_ERROR(InvalidData, data);
RECALL_DEFINE_ERROR(NonDivisibleN, data);
RECALL_DEFINE_ERROR(InsufficientExposed, data);
RECALL_DEFINE_ERROR(DegenerateScores, data);
RECALL_DEFINE_ERROR(InvalidSimplex, numerical);
RECALL_DEFINE_ERROR(InadmissibleEtas, numerical);
RECALL_DEFINE_ERROR(DegenerateMargin, numerical);
RECALL_DEFINE_ERROR(DegenerateStratum, numerical);
RECALL_DEFINE_ERROR(AllDegenerate, numerical);
RECALL_DEFINE_ERROR(PositivityViolation, numerical);
RECALL_DEFINE_ERROR(InfeasibleInstance, numerical);
RECALL_DEFINE_ERROR(ReplicateFailure, numerical);

#undef RECALL_DEFINE_ERROR

/// Raised when a bound denominator is non-positive at the requested delta.
/// Carries the supremum of deltas for which the bound is defined.
class DegenerateBound : public Error {
 public:
  DegenerateBound(const std::string& what, double max_delta)
      : Error(ErrorClass::numerical, "DegenerateBound: " + what),
        max_delta_(max_delta) {}

  double max_admissible_delta() const noexcept { return max_delta_; }

 private:
  double max_delta_;
};

}  // namespace recall
