#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace foodclf {

struct ManifestSample {
  std::string path;
  int label = 0;

  friend bool operator==(const ManifestSample&, const ManifestSample&) = default;
};

/// Class names plus (path, label) pairs. Relative paths resolve against
/// `root`, which `load_manifest` sets to the manifest's directory.
struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestSample> samples;
  std::filesystem::path root;

  std::size_t num_classes() const noexcept { return class_names.size(); }
  std::filesystem::path resolve(const ManifestSample& sample) const;

  /// Throws ManifestInvalid on an empty class list, out-of-range labels or
  /// duplicate paths.
  void validate() const;

  /// Equality ignores `root`.
  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.class_names == b.class_names && a.samples == b.samples;
  }
};

DatasetManifest parse_manifest(const std::string& json_text);
std::string manifest_to_json(const DatasetManifest& manifest);

DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

}  // namespace foodclf
