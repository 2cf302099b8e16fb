#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace foodclf {

/// Failure categories raised by the library. Each maps onto one CLI exit code.
enum class ErrorCode {
  // Parse / configuration (exit 2)
  ManifestParse,
  BundleParse,
  ModelParse,
  FeatureParse,
  ConfigInvalid,
  // Data validation (exit 3)
  UnsupportedFormat,
  MalformedImage,
  ManifestInvalid,
  ShapeMismatch,
  BundleShapeInvalid,
  DimensionMismatch,
  TooFewSamples,
  SingleCluster,
  DegenerateLabels,
  ArchMismatch,
  StratifyImpossible,
  LengthMismatch,
  EmptyInput,
  InvalidArgument,
  Io,
  // Numerical (exit 4)
  NumericalFailure,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Process exit code for a failure category: 2 parse/config, 3 data, 4 numerical.
int exit_code_for(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Same error with `context` prepended to the detail message.
  Error with_context(const std::string& context) const {
    return Error(code_, context + ": " + detail_);
  }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace foodclf
