#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace arcweaver {

enum class ErrorCode {
  NotFound,
  Conflict,
  ConstraintViolation,
  Precondition,
  OutOfOrderEpisode,
  AlreadyProcessed,
  SelfMerge,
  DimensionMismatch,
  ZeroVector,
  InsufficientPoints,
  ProviderUnavailable,
  SchemaRepairExhausted,
  UnmatchedMockRequest,
  MalformedInput,
  Config,
  Injected,
};

std::string_view to_string(ErrorCode code);

// Every domain failure carries a machine-readable code; the API and CLI map
// codes to HTTP statuses and exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::Precondition, message);
}

}  // namespace arcweaver
