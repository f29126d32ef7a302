#include "drive/error.hpp"

namespace drive {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoSubject: return "NoSubject";
    case ErrorCode::NoRelation: return "NoRelation";
    case ErrorCode::NoObject: return "NoObject";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::AnnotationUnavailable: return "AnnotationUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::NoKnownTokens: return "NoKnownTokens";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::InsufficientVocabulary: return "InsufficientVocabulary";
    case ErrorCode::NormalizationUndefined: return "NormalizationUndefined";
    case ErrorCode::NoNegatives: return "NoNegatives";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::NoEvaluableAnchors: return "NoEvaluableAnchors";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace drive
