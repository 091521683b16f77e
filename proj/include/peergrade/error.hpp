#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace peergrade {

enum class ErrorKind {
  Schema,
  DuplicateGrade,
  DanglingId,
  RoleViolation,
  Validation,
  InvalidExercise,
  DegenerateExercise,
  KeyMismatch,
  InsufficientData,
  UndefinedCorrelation,
  InfeasibleAssignment,
  MissingTruth,
  MissingExam,
  Precondition,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema: return "schema-mismatch";
    case ErrorKind::DuplicateGrade: return "duplicate-grade";
    case ErrorKind::DanglingId: return "dangling-id";
    case ErrorKind::RoleViolation: return "role-violation";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::InvalidExercise: return "invalid-exercise";
    case ErrorKind::DegenerateExercise: return "degenerate-exercise";
    case ErrorKind::KeyMismatch: return "key-mismatch";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::UndefinedCorrelation: return "undefined-correlation";
    case ErrorKind::InfeasibleAssignment: return "infeasible-assignment";
    case ErrorKind::MissingTruth: return "missing-truth";
    case ErrorKind::MissingExam: return "missing-exam";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

// Every domain failure in the library is reported through this type; the
// kind lets callers (and tests) distinguish failure classes without parsing
// the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace peergrade
