#include "gpshape/error.h"

namespace gpshape {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegeneratePoint: return "DegeneratePoint";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::InvalidTransform: return "InvalidTransform";
    case ErrorCode::InvalidIntrinsics: return "InvalidIntrinsics";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::DegenerateExtent: return "DegenerateExtent";
    case ErrorCode::NoHits: return "NoHits";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::DuplicateCenters: return "DuplicateCenters";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ClusterTooSmall: return "ClusterTooSmall";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::CorruptTemplate: return "CorruptTemplate";
    case ErrorCode::NoUsablePoints: return "NoUsablePoints";
    case ErrorCode::InvalidDelta: return "InvalidDelta";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Interrupted: return "Interrupted";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace gpshape
