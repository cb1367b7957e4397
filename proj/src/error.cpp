#include "eqte/error.hpp"

namespace eqte {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kInvalidGrid: return "invalid-grid";
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kSingularDesign: return "singular-design";
    case ErrorKind::kSolverFailure: return "solver-failure";
    case ErrorKind::kInternal: return "internal";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kInsufficientTail: return "insufficient-tail";
    case ErrorKind::kDegenerateTail: return "degenerate-tail";
    case ErrorKind::kSelectionFailure: return "selection-failure";
    case ErrorKind::kEstimandUndefined: return "estimand-undefined";
    case ErrorKind::kSeparation: return "separation";
    case ErrorKind::kTransform: return "transform";
    case ErrorKind::kBootstrapFailure: return "bootstrap-failure";
  }
  return "unknown";
}

bool Error::is_validation() const noexcept {
  switch (kind_) {
    case ErrorKind::kSchema:
    case ErrorKind::kParse:
    case ErrorKind::kEmptyInput:
    case ErrorKind::kInvalidGrid:
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kDimensionMismatch:
      return true;
    default:
      return false;
  }
}

}  // namespace eqte
