#include "semtok/error.hpp"

namespace semtok {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kMalformedHeader: return "malformed header";
    case ErrorCode::kTruncatedPayload: return "truncated payload";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kOutOfRange: return "out of range";
    case ErrorCode::kVocabMismatch: return "vocab mismatch";
    case ErrorCode::kInfeasibleAlignment: return "infeasible alignment";
    case ErrorCode::kNumericFailure: return "numeric failure";
    case ErrorCode::kInsufficientData: return "insufficient data";
    case ErrorCode::kUnsatisfiable: return "unsatisfiable";
    case ErrorCode::kParse: return "parse error";
  }
  return "unknown error";
}

}  // namespace semtok
