#include "phishaudit/error.hpp"

namespace phishaudit {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyUrl: return "EmptyUrl";
    case ErrorCode::kResolverUnavailable: return "ResolverUnavailable";
    case ErrorCode::kMissingLabelColumn: return "MissingLabelColumn";
    case ErrorCode::kDuplicateColumnName: return "DuplicateColumnName";
    case ErrorCode::kEmptyFile: return "EmptyFile";
    case ErrorCode::kUnmappedColumn: return "UnmappedColumn";
    case ErrorCode::kAllMissingColumn: return "AllMissingColumn";
    case ErrorCode::kDegenerateClass: return "DegenerateClass";
    case ErrorCode::kTooFewMinoritySamples: return "TooFewMinoritySamples";
    case ErrorCode::kInsufficientRows: return "InsufficientRows";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kTooManyFeatures: return "TooManyFeatures";
    case ErrorCode::kEmptyIntersection: return "EmptyIntersection";
    case ErrorCode::kUnknownModel: return "UnknownModel";
    case ErrorCode::kMissingImportance: return "MissingImportance";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Error";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kResolverUnavailable:
      return false;
    default:
      return true;
  }
}

}  // namespace phishaudit
