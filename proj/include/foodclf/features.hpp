#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "foodclf/convnet.hpp"
#include "foodclf/manifest.hpp"

namespace foodclf {

/// N x D row-major float features with one integer label per row.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::string source;
  std::uint64_t seed = 0;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t n, std::size_t d, std::vector<float> values, std::vector<int> labels,
                std::vector<std::string> class_names = {});

  std::span<const float> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<float> row(std::size_t i) { return {values.data() + i * cols, cols}; }

  /// Number of classes: class_names.size() when set, else max label + 1.
  std::size_t num_classes() const;

  /// Rows in the given order (indices may repeat).
  FeatureMatrix select(std::span<const std::size_t> indices) const;

  /// Throws on inconsistent sizes, out-of-range labels, or non-finite values.
  void validate() const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// Rows of `a` followed by rows of `b`. Column counts and class lists must agree.
FeatureMatrix concat_rows(const FeatureMatrix& a, const FeatureMatrix& b);

std::vector<std::string> default_class_names(std::size_t k);

// FMX1 file: "FMX1", u32 n, u32 d, n*d f32, n u16 labels, trailing JSON
// {"classes": [...], "source": "...", "seed": u64}. All little-endian.
std::vector<std::uint8_t> serialize_features(const FeatureMatrix& fm);
FeatureMatrix parse_features(std::span<const std::uint8_t> bytes);
FeatureMatrix load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path, const FeatureMatrix& fm);

/// Decode -> resize to the bundle input -> normalize -> forward, for every
/// manifest sample in manifest order.
FeatureMatrix extract_features(const DatasetManifest& manifest, const WeightBundle& bundle,
                               const NormalizationSpec& norm);
FeatureMatrix extract_features(const DatasetManifest& manifest, const WeightBundle& bundle);

/// Feature vector for a single decoded image.
Tensor image_features(const Image& img, const WeightBundle& bundle, const NormalizationSpec& norm);

}  // namespace foodclf
