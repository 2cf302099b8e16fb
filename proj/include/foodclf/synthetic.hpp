#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "foodclf/features.hpp"
#include "foodclf/image.hpp"
#include "foodclf/manifest.hpp"
#include "foodclf/rng.hpp"

namespace foodclf {

struct TextureCorpusSpec {
  std::size_t classes = 10;
  std::size_t per_class = 30;
  std::uint32_t size = 64;
  std::uint64_t seed = 0;
};

/// One procedural texture. Classes differ in hue and pattern family
/// (stripes, checker, dots, rings, blotches); orientation, frequency, phase
/// and pixel noise vary per draw. Channel values stay inside [8, 247].
Image synth_texture(std::size_t cls, std::size_t num_classes, std::uint32_t size, Rng& rng);

/// Writes `<class>_<nnn>.png` files and manifest.json into `dir`.
DatasetManifest write_texture_corpus(const std::filesystem::path& dir, const TextureCorpusSpec& spec);

/// Relabels exactly round(fraction * n) rows, each to a different class
/// drawn uniformly from the other k - 1.
std::vector<int> inject_label_noise(std::span<const int> labels, std::size_t num_classes, double fraction,
                                    std::uint64_t seed);

/// k isotropic Gaussian blobs with standard deviation `sigma`; centers are
/// at least `separation * sigma` apart.
FeatureMatrix gaussian_blobs(std::size_t k, std::size_t per_cluster, std::size_t dim, double separation,
                             double sigma, std::uint64_t seed);

}  // namespace foodclf
