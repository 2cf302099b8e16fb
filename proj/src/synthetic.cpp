#include "foodclf/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "foodclf/error.hpp"

namespace foodclf {

namespace {

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double sector = h * 6.0;
  const int i = static_cast<int>(std::floor(sector)) % 6;
  const double f = sector - std::floor(sector);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

std::uint8_t to_channel(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 8L, 247L)); }

}  // namespace

Image synth_texture(std::size_t cls, std::size_t num_classes, std::uint32_t size, Rng& rng) {
  require(num_classes > 0 && cls < num_classes, ErrorCode::InvalidArgument, "class index out of range");
  require(size > 0, ErrorCode::InvalidArgument, "texture size must be positive");
  const double hue = static_cast<double>(cls) / static_cast<double>(num_classes) + 0.02 * (rng.uniform() - 0.5);
  const auto fg = hsv_to_rgb(hue, 0.75 + 0.1 * rng.uniform(), 0.85);
  const auto bg = hsv_to_rgb(hue + 0.5, 0.25, 0.35 + 0.1 * rng.uniform());

  const int family = static_cast<int>(cls % 5);
  const double angle = rng.uniform() * std::numbers::pi;
  const double freq = (3.0 + 3.0 * rng.uniform()) / static_cast<double>(size);
  const double phase = rng.uniform() * 2.0 * std::numbers::pi;
  const double cx = size * (0.3 + 0.4 * rng.uniform());
  const double cy = size * (0.3 + 0.4 * rng.uniform());
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);

  // Blotch field: a few random bumps.
  std::array<std::array<double, 3>, 6> bumps{};
  for (auto& b : bumps) b = {rng.uniform() * size, rng.uniform() * size, size * (0.08 + 0.1 * rng.uniform())};

  std::vector<std::uint8_t> px(static_cast<std::size_t>(size) * size * 3);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::uint32_t y = 0; y < size; ++y) {
    for (std::uint32_t x = 0; x < size; ++x) {
      const double u = ca * x + sa * y;
      const double v = -sa * x + ca * y;
      double t = 0.0;
      switch (family) {
        case 0: t = 0.5 + 0.5 * std::sin(two_pi * freq * u + phase); break;
        case 1: t = (std::sin(two_pi * freq * u + phase) * std::sin(two_pi * freq * v) > 0.0) ? 1.0 : 0.0; break;
        case 2: {
          const double du = std::sin(two_pi * freq * u + phase);
          const double dv = std::sin(two_pi * freq * v + phase);
          t = du * dv > 0.5 ? 1.0 : 0.0;
          break;
        }
        case 3: {
          const double r = std::hypot(x - cx, y - cy);
          t = 0.5 + 0.5 * std::cos(two_pi * freq * r + phase);
          break;
        }
        default: {
          for (const auto& b : bumps) {
            const double d2 = (x - b[0]) * (x - b[0]) + (y - b[1]) * (y - b[1]);
            t += std::exp(-d2 / (2.0 * b[2] * b[2]));
          }
          t = std::min(t, 1.0);
          break;
        }
      }
      const std::size_t o = (static_cast<std::size_t>(y) * size + x) * 3;
      for (int c = 0; c < 3; ++c) {
        const double value = 255.0 * (t * fg[c] + (1.0 - t) * bg[c]) + 10.0 * rng.normal();
        px[o + c] = to_channel(value);
      }
    }
  }
  return Image(size, size, std::move(px));
}

DatasetManifest write_texture_corpus(const std::filesystem::path& dir, const TextureCorpusSpec& spec) {
  require(spec.classes >= 2, ErrorCode::InvalidArgument, "corpus needs at least two classes");
  require(spec.per_class >= 1, ErrorCode::InvalidArgument, "corpus needs at least one image per class");
  std::filesystem::create_directories(dir);
  DatasetManifest manifest;
  manifest.class_names = default_class_names(spec.classes);
  manifest.root = dir;
  Rng rng(spec.seed);
  char name[64];
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      std::snprintf(name, sizeof(name), "%s_%03zu.png", manifest.class_names[c].c_str(), i);
      write_png(dir / name, synth_texture(c, spec.classes, spec.size, rng));
      manifest.samples.push_back({name, static_cast<int>(c)});
    }
  }
  write_manifest(dir / "manifest.json", manifest);
  return manifest;
}

std::vector<int> inject_label_noise(std::span<const int> labels, std::size_t num_classes, double fraction,
                                    std::uint64_t seed) {
  require(num_classes >= 2, ErrorCode::InvalidArgument, "label noise needs at least two classes");
  require(fraction >= 0.0 && fraction <= 1.0, ErrorCode::InvalidArgument, "noise fraction must lie in [0, 1]");
  std::vector<int> out(labels.begin(), labels.end());
  const auto flips = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(labels.size())));
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  for (std::size_t t = 0; t < flips; ++t) {
    const std::size_t i = order[t];
    const auto shift = 1 + static_cast<int>(rng.below(num_classes - 1));
    out[i] = (labels[i] + shift) % static_cast<int>(num_classes);
  }
  return out;
}

FeatureMatrix gaussian_blobs(std::size_t k, std::size_t per_cluster, std::size_t dim, double separation,
                             double sigma, std::uint64_t seed) {
  require(k >= 1 && per_cluster >= 1 && dim >= 1, ErrorCode::InvalidArgument, "blob counts must be positive");
  Rng rng(seed);
  const double min_dist = separation * sigma;
  // Box side large enough that rejection sampling settles quickly.
  const double side = min_dist * std::max(2.0, 2.0 * std::pow(static_cast<double>(k), 1.0 / static_cast<double>(dim)));
  std::vector<std::vector<double>> centers;
  while (centers.size() < k) {
    std::vector<double> c(dim);
    for (double& v : c) v = side * rng.uniform();
    bool ok = true;
    for (const auto& other : centers) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) d2 += (c[j] - other[j]) * (c[j] - other[j]);
      if (d2 < min_dist * min_dist) {
        ok = false;
        break;
      }
    }
    if (ok) centers.push_back(std::move(c));
  }
  FeatureMatrix fm;
  fm.rows = k * per_cluster;
  fm.cols = dim;
  fm.class_names = default_class_names(k);
  fm.source = "blobs";
  fm.seed = seed;
  fm.values.reserve(fm.rows * dim);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < per_cluster; ++i) {
      for (std::size_t j = 0; j < dim; ++j) fm.values.push_back(static_cast<float>(centers[c][j] + sigma * rng.normal()));
      fm.labels.push_back(static_cast<int>(c));
    }
  }
  return fm;
}

}  // namespace foodclf
