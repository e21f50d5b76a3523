#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phishaudit {

enum class ErrorCode {
  kEmptyUrl,
  kResolverUnavailable,
  kMissingLabelColumn,
  kDuplicateColumnName,
  kEmptyFile,
  kUnmappedColumn,
  kAllMissingColumn,
  kDegenerateClass,
  kTooFewMinoritySamples,
  kInsufficientRows,
  kSchemaMismatch,
  kLengthMismatch,
  kTooManyFeatures,
  kEmptyIntersection,
  kUnknownModel,
  kMissingImportance,
  kInvalidArgument,
  kConfig,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// True for errors caused by bad user input (exit code 1 at the CLI) rather
// than failures while running (exit code 2).
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace phishaudit
