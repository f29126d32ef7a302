#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace drive {

enum class ErrorCode {
  NoSubject,
  NoRelation,
  NoObject,
  InvalidInput,
  AnnotationUnavailable,
  MalformedResponse,
  NoKnownTokens,
  DegenerateLabels,
  DuplicateId,
  EmptyDataset,
  ParseError,
  SchemaVersionMismatch,
  DimensionMismatch,
  NonFinite,
  EmptyBatch,
  InsufficientVocabulary,
  NormalizationUndefined,
  NoNegatives,
  DivergedLoss,
  NoEvaluableAnchors,
  UnsupportedFormat,
  ValidationError,
  IoError,
};

std::string_view error_code_name(ErrorCode code);

// Every domain failure in the library is raised as drive::Error. The CLI maps
// it to exit code 1 and a single JSON object on stderr.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace drive
