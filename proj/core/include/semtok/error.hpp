#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semtok {

enum class ErrorCode {
  kIo,
  kMalformedHeader,
  kTruncatedPayload,
  kNonFinite,
  kInvalidArgument,
  kDimensionMismatch,
  kOutOfRange,
  kVocabMismatch,
  kInfeasibleAlignment,
  kNumericFailure,
  kInsufficientData,
  kUnsatisfiable,
  kParse,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library is reported through this exception; `code()`
// lets callers (and the CLI) distinguish failure classes without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace semtok
