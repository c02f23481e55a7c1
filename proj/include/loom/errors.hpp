#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace loom {

// Exit-code categories surfaced by the CLI.
enum class ErrorCategory : int {
  spec = 2,
  planning = 3,
  search = 4,
  simulation = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message),
        category_(category),
        code_(std::move(code)) {}

  ErrorCategory category() const { return category_; }
  const std::string& code() const { return code_; }

 private:
  ErrorCategory category_;
  std::string code_;
};

#define LOOM_DEFINE_ERROR(Name, category)                   \
  class Name : public Error {                               \
   public:                                                  \
    explicit Name(const std::string& message)               \
        : Error(ErrorCategory::category, #Name, message) {} \
  };

LOOM_DEFINE_ERROR(SchemaError, spec)
LOOM_DEFINE_ERROR(ValidationError, spec)
LOOM_DEFINE_ERROR(CycleError, spec)
LOOM_DEFINE_ERROR(DuplicateKeyError, spec)
LOOM_DEFINE_ERROR(DanglingReferenceError, spec)
LOOM_DEFINE_ERROR(UnknownCapabilityError, spec)
LOOM_DEFINE_ERROR(DegenerateObservationError, spec)

LOOM_DEFINE_ERROR(UnmappableTaskError, planning)
LOOM_DEFINE_ERROR(AmbiguousTaskError, planning)
LOOM_DEFINE_ERROR(DisconnectedTaskError, planning)
LOOM_DEFINE_ERROR(KindConflictError, planning)
LOOM_DEFINE_ERROR(SchemaBindingError, planning)

LOOM_DEFINE_ERROR(InvalidConfigError, search)
LOOM_DEFINE_ERROR(NoFeasibleConfigError, search)

LOOM_DEFINE_ERROR(InsufficientCapacityError, simulation)
LOOM_DEFINE_ERROR(DoubleReleaseError, simulation)
LOOM_DEFINE_ERROR(DeadlockError, simulation)

#undef LOOM_DEFINE_ERROR

}  // namespace loom
