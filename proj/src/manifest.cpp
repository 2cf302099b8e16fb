#include "foodclf/manifest.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "foodclf/error.hpp"
#include "json.hpp"

namespace foodclf {

using nlohmann::json;

std::filesystem::path DatasetManifest::resolve(const ManifestSample& sample) const {
  std::filesystem::path p(sample.path);
  if (p.is_absolute() || root.empty()) return p;
  return root / p;
}

void DatasetManifest::validate() const {
  require(!class_names.empty(), ErrorCode::ManifestInvalid, "manifest has an empty class list");
  const int k = static_cast<int>(class_names.size());
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    require(s.label >= 0 && s.label < k, ErrorCode::ManifestInvalid,
            "sample " + std::to_string(i) + " (" + s.path + ") has label " + std::to_string(s.label) +
                " outside [0, " + std::to_string(k) + ")");
    require(seen.insert(s.path).second, ErrorCode::ManifestInvalid, "duplicate path " + s.path);
  }
}

DatasetManifest parse_manifest(const std::string& json_text) {
  DatasetManifest m;
  try {
    const json doc = json::parse(json_text);
    require(doc.is_object(), ErrorCode::ManifestParse, "manifest must be a JSON object");
    m.class_names = doc.at("classes").get<std::vector<std::string>>();
    for (const auto& entry : doc.at("samples")) {
      const auto& label = entry.at("label");
      require(label.is_number_integer(), ErrorCode::ManifestParse, "sample label must be an integer");
      m.samples.push_back({entry.at("path").get<std::string>(), label.get<int>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ManifestParse, e.what());
  }
  m.validate();
  return m;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::ordered_json doc;
  doc["classes"] = manifest.class_names;
  auto samples = nlohmann::ordered_json::array();
  for (const auto& s : manifest.samples) {
    samples.push_back({{"path", s.path}, {"label", s.label}});
  }
  doc["samples"] = std::move(samples);
  return doc.dump(2) + "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  DatasetManifest m;
  try {
    m = parse_manifest(buffer.str());
  } catch (const Error& e) {
    throw e.with_context(path.string());
  }
  m.root = path.parent_path();
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  manifest.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write manifest " + path.string());
  out << manifest_to_json(manifest);
}

}  // namespace foodclf
