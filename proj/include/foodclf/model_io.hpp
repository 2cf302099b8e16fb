#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "foodclf/gbdt.hpp"
#include "foodclf/mlp.hpp"
#include "foodclf/svm.hpp"

namespace foodclf {

using AnyModel = std::variant<SvmModel, GbdtModel, MlpModel>;

/// "svm", "gbdt" or "mlp".
std::string model_kind(const AnyModel& model);

/// FMD1 file: "FMD1", u32 LE header length, UTF-8 JSON header (kind,
/// hyperparameters, shapes, seed, block list), then each declared block as
/// little-endian f32 or f64 values in header order.
std::vector<std::uint8_t> serialize_model(const AnyModel& model);
AnyModel parse_model(std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path& path, const AnyModel& model);
AnyModel load_model(const std::filesystem::path& path);

std::vector<int> predict(const AnyModel& model, const FeatureMatrix& x);

}  // namespace foodclf
