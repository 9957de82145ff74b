#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kpcalib {

// Every failure the library reports is one of these kinds. The CLI maps them
// onto exit codes, so new kinds must be added to ExitCodeFor() as well.
enum class ErrorKind {
  kAngleNearPi,
  kBehindCamera,
  kParseError,
  kValidationError,
  kDimensionMismatch,
  kInsufficientPoints,
  kDegenerateConfiguration,
  kAllPointsBehindCamera,
  kInsufficientMotion,
  kEmptyEvaluation,
  kSolverUnavailableForM,
  kMissingLimits,
  kIoError,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace kpcalib
