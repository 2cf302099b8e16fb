#include "foodclf/error.hpp"

namespace foodclf {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ManifestParse: return "ManifestParse";
    case ErrorCode::BundleParse: return "BundleParse";
    case ErrorCode::ModelParse: return "ModelParse";
    case ErrorCode::FeatureParse: return "FeatureParse";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::MalformedImage: return "MalformedImage";
    case ErrorCode::ManifestInvalid: return "ManifestInvalid";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BundleShapeInvalid: return "BundleShapeInvalid";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::SingleCluster: return "SingleCluster";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::ArchMismatch: return "ArchMismatch";
    case ErrorCode::StratifyImpossible: return "StratifyImpossible";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ManifestParse:
    case ErrorCode::BundleParse:
    case ErrorCode::ModelParse:
    case ErrorCode::FeatureParse:
    case ErrorCode::ConfigInvalid:
      return 2;
    case ErrorCode::NumericalFailure:
      return 4;
    default:
      return 3;
  }
}

}  // namespace foodclf
