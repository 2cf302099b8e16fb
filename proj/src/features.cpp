#include "foodclf/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "foodclf/binio.hpp"
#include "foodclf/error.hpp"
#include "json.hpp"

namespace foodclf {

FeatureMatrix::FeatureMatrix(std::size_t n, std::size_t d, std::vector<float> v, std::vector<int> l,
                             std::vector<std::string> names)
    : rows(n), cols(d), values(std::move(v)), labels(std::move(l)), class_names(std::move(names)) {
  validate();
}

std::size_t FeatureMatrix::num_classes() const {
  if (!class_names.empty()) return class_names.size();
  int top = -1;
  for (int l : labels) top = std::max(top, l);
  return static_cast<std::size_t>(top + 1);
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.rows = indices.size();
  out.cols = cols;
  out.class_names = class_names;
  out.source = source;
  out.seed = seed;
  out.values.resize(indices.size() * cols);
  out.labels.resize(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    require(i < rows, ErrorCode::InvalidArgument, "row index " + std::to_string(i) + " out of range");
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(i * cols), cols,
                out.values.begin() + static_cast<std::ptrdiff_t>(k * cols));
    out.labels[k] = labels[i];
  }
  return out;
}

void FeatureMatrix::validate() const {
  require(values.size() == rows * cols, ErrorCode::ShapeMismatch,
          "feature values length " + std::to_string(values.size()) + " != " + std::to_string(rows) + "x" +
              std::to_string(cols));
  require(labels.size() == rows, ErrorCode::LengthMismatch, "label count differs from row count");
  const int k = class_names.empty() ? std::numeric_limits<int>::max() : static_cast<int>(class_names.size());
  for (std::size_t i = 0; i < rows; ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      fail(ErrorCode::InvalidArgument, "row " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                                           " outside the class list");
    }
  }
  for (float v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::NumericalFailure, "feature matrix contains a non-finite value");
  }
}

FeatureMatrix concat_rows(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows == 0 && a.cols == 0) return b;
  if (b.rows == 0 && b.cols == 0) return a;
  require(a.cols == b.cols, ErrorCode::DimensionMismatch,
          "cannot concatenate " + std::to_string(a.cols) + "- and " + std::to_string(b.cols) + "-column features");
  require(a.class_names.empty() || b.class_names.empty() || a.class_names == b.class_names,
          ErrorCode::InvalidArgument, "cannot concatenate feature matrices with different class lists");
  FeatureMatrix out = a;
  out.rows = a.rows + b.rows;
  out.values.insert(out.values.end(), b.values.begin(), b.values.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  if (out.class_names.empty()) out.class_names = b.class_names;
  out.source = a.source + "+" + b.source;
  return out;
}

std::vector<std::string> default_class_names(std::size_t k) {
  std::vector<std::string> names;
  names.reserve(k);
  for (std::size_t i = 0; i < k; ++i) names.push_back("class" + std::to_string(i));
  return names;
}

namespace {
constexpr std::string_view kFeatureMagic = "FMX1";
}

std::vector<std::uint8_t> serialize_features(const FeatureMatrix& fm) {
  fm.validate();
  require(fm.rows <= 0xFFFFFFFFu && fm.cols <= 0xFFFFFFFFu, ErrorCode::InvalidArgument, "feature matrix too large");
  binio::Writer out;
  out.text(kFeatureMagic);
  out.u32(static_cast<std::uint32_t>(fm.rows));
  out.u32(static_cast<std::uint32_t>(fm.cols));
  for (float v : fm.values) out.f32(v);
  for (int l : fm.labels) {
    require(l <= 0xFFFF, ErrorCode::InvalidArgument, "label does not fit in 16 bits");
    out.u16(static_cast<std::uint16_t>(l));
  }
  nlohmann::ordered_json trailer;
  trailer["classes"] = fm.class_names;
  trailer["source"] = fm.source;
  trailer["seed"] = fm.seed;
  out.text(trailer.dump());
  return std::move(out).take();
}

FeatureMatrix parse_features(std::span<const std::uint8_t> bytes) {
  binio::Reader in(bytes, ErrorCode::FeatureParse);
  in.expect_magic(kFeatureMagic);
  FeatureMatrix fm;
  fm.rows = in.u32();
  fm.cols = in.u32();
  const std::size_t count = fm.rows * fm.cols;
  require(count <= in.remaining() / 4, ErrorCode::FeatureParse, "feature values truncated");
  fm.values.resize(count);
  for (auto& v : fm.values) v = in.f32();
  fm.labels.resize(fm.rows);
  for (auto& l : fm.labels) l = in.u16();
  try {
    const auto trailer = nlohmann::json::parse(in.text(in.remaining()));
    fm.class_names = trailer.at("classes").get<std::vector<std::string>>();
    fm.source = trailer.value("source", std::string{});
    fm.seed = trailer.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FeatureParse, std::string("bad trailer: ") + e.what());
  }
  fm.validate();
  return fm;
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path);
  try {
    return parse_features(bytes);
  } catch (const Error& e) {
    throw e.with_context(path.string());
  }
}

void save_features(const std::filesystem::path& path, const FeatureMatrix& fm) {
  binio::write_file(path, serialize_features(fm));
}

Tensor image_features(const Image& img, const WeightBundle& bundle, const NormalizationSpec& norm) {
  const Image sized = resize_bilinear(img, static_cast<std::uint32_t>(bundle.input.width),
                                      static_cast<std::uint32_t>(bundle.input.height));
  Tensor out = forward(bundle, image_to_tensor(sized, norm));
  if (!out.all_finite()) fail(ErrorCode::NumericalFailure, "non-finite feature value");
  return out;
}

FeatureMatrix extract_features(const DatasetManifest& manifest, const WeightBundle& bundle,
                               const NormalizationSpec& norm) {
  manifest.validate();
  norm.validate();
  require(bundle.input.channels == 3, ErrorCode::BundleShapeInvalid, "image features need a 3-channel bundle input");
  const std::size_t d = bundle.output_dim();
  FeatureMatrix fm;
  fm.rows = manifest.samples.size();
  fm.cols = d;
  fm.class_names = manifest.class_names;
  fm.values.resize(fm.rows * d);
  fm.labels.resize(fm.rows);
  for (std::size_t i = 0; i < fm.rows; ++i) {
    const auto& sample = manifest.samples[i];
    Tensor row;
    try {
      row = image_features(read_image(manifest.resolve(sample)), bundle, norm);
    } catch (const Error& e) {
      throw e.with_context("sample " + std::to_string(i) + " (" + sample.path + ")");
    }
    std::copy(row.data().begin(), row.data().end(), fm.values.begin() + static_cast<std::ptrdiff_t>(i * d));
    fm.labels[i] = sample.label;
  }
  return fm;
}

FeatureMatrix extract_features(const DatasetManifest& manifest, const WeightBundle& bundle) {
  return extract_features(manifest, bundle, bundle.normalization);
}

}  // namespace foodclf
