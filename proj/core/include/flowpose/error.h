#ifndef FLOWPOSE_ERROR_H_
#define FLOWPOSE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace flowpose {

enum class ErrorCode {
  kInvalidArgument,
  kNonPositiveDepth,
  kDimensionMismatch,
  kInsufficientCorrespondences,
  kDegenerateConfiguration,
  kRansacFailure,
  kCheiralityAmbiguity,
  kPoseDegenerate,
  kGradientUndefined,
  kEmptySamples,
  kEmptyMask,
  kZeroMeanDisparity,
  kScaleFitFailure,
  kPnpFailure,
  kInsufficientPoints,
  kDegenerateGeometry,
  kSequenceTooShort,
  kEmptyOverlap,
  kInfeasibleFrustum,
  kBadMagic,
  kTruncatedFile,
  kUnsupportedFormat,
  kParseError,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this exception. The code is the
// stable, testable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace flowpose

#endif  // FLOWPOSE_ERROR_H_
