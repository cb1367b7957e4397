#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eqte {

enum class ErrorKind {
  kSchema,
  kParse,
  kEmptyInput,
  kInvalidGrid,
  kInvalidArgument,
  kDimensionMismatch,
  kSingularDesign,
  kSolverFailure,
  kInternal,
  kDomain,
  kInsufficientTail,
  kDegenerateTail,
  kSelectionFailure,
  kEstimandUndefined,
  kSeparation,
  kTransform,
  kBootstrapFailure,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI,
// the bootstrap and the study harness) can classify it without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // True for failures caused by bad user input rather than by estimation.
  bool is_validation() const noexcept;

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace eqte
