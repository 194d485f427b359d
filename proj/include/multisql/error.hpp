#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace multisql {

enum class ErrorCode {
  kUnreadableDatabase,
  kUnsupportedDialect,
  kDanglingSubset,
  kUnboundRole,
  kProviderExhausted,
  kMockExhausted,
  kDimensionMismatch,
  kBackendFailure,
  kExtractionFailure,
  kUnparseableSelection,
  kEmptyClusterSet,
  kNoApplicableMutation,
  kGoldExecutionFailure,
  kNoCorrectCandidate,
  kMalformedDataset,
  kConfigInvalid,
  kInvalidArgument,
};

constexpr std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnreadableDatabase: return "UnreadableDatabase";
    case ErrorCode::kUnsupportedDialect: return "UnsupportedDialect";
    case ErrorCode::kDanglingSubset: return "DanglingSubset";
    case ErrorCode::kUnboundRole: return "UnboundRole";
    case ErrorCode::kProviderExhausted: return "ProviderExhausted";
    case ErrorCode::kMockExhausted: return "MockExhausted";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kBackendFailure: return "BackendFailure";
    case ErrorCode::kExtractionFailure: return "ExtractionFailure";
    case ErrorCode::kUnparseableSelection: return "UnparseableSelection";
    case ErrorCode::kEmptyClusterSet: return "EmptyClusterSet";
    case ErrorCode::kNoApplicableMutation: return "NoApplicableMutation";
    case ErrorCode::kGoldExecutionFailure: return "GoldExecutionFailure";
    case ErrorCode::kNoCorrectCandidate: return "NoCorrectCandidate";
    case ErrorCode::kMalformedDataset: return "MalformedDataset";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

// Every recoverable failure in the library is an Error carrying a code, so
// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix, for re-wrapping with context.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

// True for failures of a model/embedding provider; pipeline stages treat
// these uniformly as BackendFailure.
inline bool is_backend_error(ErrorCode code) {
  return code == ErrorCode::kUnboundRole || code == ErrorCode::kProviderExhausted ||
         code == ErrorCode::kMockExhausted || code == ErrorCode::kDimensionMismatch ||
         code == ErrorCode::kBackendFailure;
}

}  // namespace multisql
