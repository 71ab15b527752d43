#include "fiatnet/common.hpp"

namespace fiatnet {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kConfig:
      return "ConfigError";
    case ErrorCode::kBadMinWidth:
      return "BadMinWidth";
    case ErrorCode::kBadRange:
      return "BadRange";
    case ErrorCode::kBatchTooSmall:
      return "BatchTooSmall";
    case ErrorCode::kNonPositiveSigma:
      return "NonPositiveSigma";
    case ErrorCode::kIo:
      return "IoError";
    case ErrorCode::kCenterOutOfBounds:
      return "CenterOutOfBounds";
    case ErrorCode::kRadiusTooLarge:
      return "RadiusTooLarge";
    case ErrorCode::kEmptySearchBand:
      return "EmptySearchBand";
    case ErrorCode::kNoEdge:
      return "NoEdge";
    case ErrorCode::kTraceMismatch:
      return "TraceMismatch";
    case ErrorCode::kShapeMismatch:
      return "ShapeMismatch";
    case ErrorCode::kEmptyDataset:
      return "EmptyDataset";
    case ErrorCode::kEmptyCollection:
      return "EmptyCollection";
    case ErrorCode::kLengthMismatch:
      return "LengthMismatch";
    case ErrorCode::kSingleClass:
      return "SingleClass";
    case ErrorCode::kSpecOutOfBounds:
      return "SpecOutOfBounds";
    case ErrorCode::kZeroVector:
      return "ZeroVector";
    case ErrorCode::kClassifierFailure:
      return "ClassifierFailure";
    case ErrorCode::kDivergenceDetected:
      return "DivergenceDetected";
  }
  return "UnknownError";
}

ErrorClass error_class(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kBadMinWidth:
    case ErrorCode::kBadRange:
    case ErrorCode::kBatchTooSmall:
    case ErrorCode::kNonPositiveSigma:
      return ErrorClass::kConfig;
    case ErrorCode::kDivergenceDetected:
      return ErrorClass::kNumerical;
    default:
      return ErrorClass::kData;
  }
}

}  // namespace fiatnet
