#include "foodclf/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "foodclf/error.hpp"
#include "foodclf/rng.hpp"

namespace foodclf {

std::string_view dihedral_name(Dihedral d) noexcept {
  switch (d) {
    case Dihedral::Identity: return "id";
    case Dihedral::Rot90: return "rot90";
    case Dihedral::Rot180: return "rot180";
    case Dihedral::Rot270: return "rot270";
    case Dihedral::FlipH: return "flipH";
    case Dihedral::FlipV: return "flipV";
    case Dihedral::Transpose: return "transpose";
    case Dihedral::AntiTranspose: return "anti-transpose";
  }
  return "?";
}

std::string_view post_op_name(PostOp p) noexcept {
  switch (p) {
    case PostOp::None: return "none";
    case PostOp::ScaleOut: return "scale_out";
    case PostOp::ScaleIn: return "scale_in";
    case PostOp::SaltPepper: return "salt_pepper";
  }
  return "?";
}

void TransformSpec::validate() const {
  require(scale_fraction > 0.0 && scale_fraction < 0.5, ErrorCode::InvalidArgument,
          "scale fraction must lie in (0, 0.5)");
  require(noise_fraction >= 0.0 && noise_fraction <= 1.0, ErrorCode::InvalidArgument,
          "noise fraction must lie in [0, 1]");
}

bool swaps_dimensions(Dihedral d) noexcept {
  return d == Dihedral::Rot90 || d == Dihedral::Rot270 || d == Dihedral::Transpose ||
         d == Dihedral::AntiTranspose;
}

AugmentationPlan AugmentationPlan::standard(double scale_fraction, double noise_fraction) {
  AugmentationPlan plan;
  plan.specs.reserve(kSize);
  for (Dihedral d : kAllDihedral) {
    for (PostOp p : kAllPostOps) {
      plan.specs.push_back({d, p, scale_fraction, noise_fraction});
    }
  }
  plan.validate();
  return plan;
}

void AugmentationPlan::validate() const {
  require(specs.size() == kSize, ErrorCode::InvalidArgument,
          "augmentation plan must hold exactly 32 transforms, has " + std::to_string(specs.size()));
  std::set<std::pair<Dihedral, PostOp>> seen;
  for (const auto& s : specs) {
    s.validate();
    require(seen.emplace(s.dihedral, s.post).second, ErrorCode::InvalidArgument,
            "augmentation plan repeats a (dihedral, post) pair");
  }
  require(specs.front().dihedral == Dihedral::Identity && specs.front().post == PostOp::None,
          ErrorCode::InvalidArgument, "augmentation plan must start with the identity");
}

Image apply_dihedral(const Image& img, Dihedral d) {
  const std::uint32_t w = img.width();
  const std::uint32_t h = img.height();
  if (d == Dihedral::Identity) return img;

  const bool swap = swaps_dimensions(d);
  Image out(swap ? h : w, swap ? w : h);
  const std::uint32_t ow = out.width();
  const std::uint32_t oh = out.height();
  for (std::uint32_t y = 0; y < oh; ++y) {
    for (std::uint32_t x = 0; x < ow; ++x) {
      std::uint32_t sx = 0;
      std::uint32_t sy = 0;
      switch (d) {
        case Dihedral::Identity: sx = x; sy = y; break;
        case Dihedral::Rot90: sx = y; sy = h - 1 - x; break;
        case Dihedral::Rot180: sx = w - 1 - x; sy = h - 1 - y; break;
        case Dihedral::Rot270: sx = w - 1 - y; sy = x; break;
        case Dihedral::FlipH: sx = w - 1 - x; sy = y; break;
        case Dihedral::FlipV: sx = x; sy = h - 1 - y; break;
        case Dihedral::Transpose: sx = y; sy = x; break;
        case Dihedral::AntiTranspose: sx = w - 1 - y; sy = h - 1 - x; break;
      }
      for (std::uint32_t c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

Image scale_out(const Image& img, double fraction) {
  const std::uint32_t w = img.width();
  const std::uint32_t h = img.height();
  const auto up_w = std::max<std::uint32_t>(w, static_cast<std::uint32_t>(std::lround(w / (1.0 - fraction))));
  const auto up_h = std::max<std::uint32_t>(h, static_cast<std::uint32_t>(std::lround(h / (1.0 - fraction))));
  const Image big = resize_bilinear(img, up_w, up_h);
  const std::uint32_t left = (up_w - w) / 2;
  const std::uint32_t top = (up_h - h) / 2;
  Image out(w, h);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      for (std::uint32_t c = 0; c < 3; ++c) out.at(x, y, c) = big.at(x + left, y + top, c);
    }
  }
  return out;
}

Image scale_in(const Image& img, double fraction) {
  const std::uint32_t w = img.width();
  const std::uint32_t h = img.height();
  const auto small_w = std::clamp<std::uint32_t>(static_cast<std::uint32_t>(std::lround(w * (1.0 - fraction))), 1, w);
  const auto small_h = std::clamp<std::uint32_t>(static_cast<std::uint32_t>(std::lround(h * (1.0 - fraction))), 1, h);
  const Image small = resize_bilinear(img, small_w, small_h);
  const auto left = static_cast<std::int64_t>((w - small_w) / 2);
  const auto top = static_cast<std::int64_t>((h - small_h) / 2);
  Image out(w, h);
  for (std::uint32_t y = 0; y < h; ++y) {
    const auto sy = static_cast<std::uint32_t>(std::clamp<std::int64_t>(y - top, 0, small_h - 1));
    for (std::uint32_t x = 0; x < w; ++x) {
      const auto sx = static_cast<std::uint32_t>(std::clamp<std::int64_t>(x - left, 0, small_w - 1));
      for (std::uint32_t c = 0; c < 3; ++c) out.at(x, y, c) = small.at(sx, sy, c);
    }
  }
  return out;
}

Image salt_pepper(const Image& img, double fraction, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(img.width()) * img.height();
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  Image out = img;
  if (count == 0) return out;

  // Partial Fisher-Yates: the first `count` slots become a uniform sample
  // without replacement.
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0U);
  Rng rng(seed);
  auto px = out.pixels();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
    const std::uint8_t value = rng.coin() ? 255 : 0;
    const std::size_t base = static_cast<std::size_t>(order[i]) * 3;
    px[base] = px[base + 1] = px[base + 2] = value;
  }
  return out;
}

Image apply_transform(const Image& img, const TransformSpec& spec, std::uint64_t seed) {
  spec.validate();
  Image oriented = apply_dihedral(img, spec.dihedral);
  switch (spec.post) {
    case PostOp::None: return oriented;
    case PostOp::ScaleOut: return scale_out(oriented, spec.scale_fraction);
    case PostOp::ScaleIn: return scale_in(oriented, spec.scale_fraction);
    case PostOp::SaltPepper: return salt_pepper(oriented, spec.noise_fraction, seed);
  }
  return oriented;
}

std::vector<Image> generate_variants(const Image& img, const AugmentationPlan& plan, std::uint64_t base_seed) {
  plan.validate();
  std::vector<Image> out;
  out.reserve(plan.specs.size());
  for (std::size_t i = 0; i < plan.specs.size(); ++i) {
    out.push_back(apply_transform(img, plan.specs[i], base_seed ^ static_cast<std::uint64_t>(i)));
  }
  return out;
}

AugmentSummary augment_dataset(const DatasetManifest& manifest, const std::filesystem::path& out_dir,
                               std::uint64_t seed, const AugmentationPlan& plan) {
  manifest.validate();
  plan.validate();
  std::filesystem::create_directories(out_dir);

  DatasetManifest augmented;
  augmented.class_names = manifest.class_names;
  augmented.root = out_dir;
  augmented.samples.reserve(manifest.samples.size() * plan.specs.size());

  std::set<std::string> stems;
  AugmentSummary summary;
  for (std::size_t j = 0; j < manifest.samples.size(); ++j) {
    const auto& sample = manifest.samples[j];
    const std::string stem = std::filesystem::path(sample.path).stem().string();
    require(stems.insert(stem).second, ErrorCode::ManifestInvalid,
            "two samples share the file stem '" + stem + "'; augmented names would collide");

    const Image source = read_image(manifest.resolve(sample));
    const auto variants = generate_variants(source, plan, seed + j);
    for (std::size_t i = 0; i < variants.size(); ++i) {
      char suffix[8];
      std::snprintf(suffix, sizeof(suffix), "_a%02zu", i);
      const std::string name = stem + suffix + ".png";
      write_png(out_dir / name, variants[i]);
      augmented.samples.push_back({name, sample.label});
    }
    ++summary.source_images;
    summary.written_images += variants.size();
  }
  summary.manifest_path = out_dir / "manifest.json";
  write_manifest(summary.manifest_path, augmented);
  return summary;
}

}  // namespace foodclf
