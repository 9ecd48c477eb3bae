#include "flowpose/error.h"

namespace flowpose {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kRansacFailure: return "RansacFailure";
    case ErrorCode::kCheiralityAmbiguity: return "CheiralityAmbiguity";
    case ErrorCode::kPoseDegenerate: return "PoseDegenerate";
    case ErrorCode::kGradientUndefined: return "GradientUndefined";
    case ErrorCode::kEmptySamples: return "EmptySamples";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kZeroMeanDisparity: return "ZeroMeanDisparity";
    case ErrorCode::kScaleFitFailure: return "ScaleFitFailure";
    case ErrorCode::kPnpFailure: return "PnpFailure";
    case ErrorCode::kInsufficientPoints: return "InsufficientPoints";
    case ErrorCode::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::kSequenceTooShort: return "SequenceTooShort";
    case ErrorCode::kEmptyOverlap: return "EmptyOverlap";
    case ErrorCode::kInfeasibleFrustum: return "InfeasibleFrustum";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace flowpose
