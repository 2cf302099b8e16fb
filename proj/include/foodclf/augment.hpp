#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "foodclf/image.hpp"
#include "foodclf/manifest.hpp"

namespace foodclf {

/// The eight symmetries of the square. Rotations are clockwise.
enum class Dihedral : std::uint8_t {
  Identity,
  Rot90,
  Rot180,
  Rot270,
  FlipH,
  FlipV,
  Transpose,
  AntiTranspose,
};

inline constexpr std::array<Dihedral, 8> kAllDihedral{
    Dihedral::Identity, Dihedral::Rot90,  Dihedral::Rot180,    Dihedral::Rot270,
    Dihedral::FlipH,    Dihedral::FlipV,  Dihedral::Transpose, Dihedral::AntiTranspose};

enum class PostOp : std::uint8_t { None, ScaleOut, ScaleIn, SaltPepper };

inline constexpr std::array<PostOp, 4> kAllPostOps{PostOp::None, PostOp::ScaleOut, PostOp::ScaleIn,
                                                   PostOp::SaltPepper};

std::string_view dihedral_name(Dihedral d) noexcept;
std::string_view post_op_name(PostOp p) noexcept;

/// A dihedral transform followed by one post-op. `scale_fraction` is used by
/// the two scale ops, `noise_fraction` by salt-and-pepper.
struct TransformSpec {
  Dihedral dihedral = Dihedral::Identity;
  PostOp post = PostOp::None;
  double scale_fraction = 0.10;
  double noise_fraction = 0.02;

  void validate() const;
  friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

bool swaps_dimensions(Dihedral d) noexcept;

/// Ordered list of 32 transforms, dihedral-major: index = 4 * dihedral + post.
/// Index 0 is the identity.
struct AugmentationPlan {
  static constexpr std::size_t kSize = 32;
  std::vector<TransformSpec> specs;

  static AugmentationPlan standard(double scale_fraction = 0.10, double noise_fraction = 0.02);
  void validate() const;
};

Image apply_dihedral(const Image& img, Dihedral d);
Image scale_out(const Image& img, double fraction);
Image scale_in(const Image& img, double fraction);

/// Sets exactly floor(fraction * W * H) distinct pixels to pure black or
/// white, drawn from a stream seeded by `seed`.
Image salt_pepper(const Image& img, double fraction, std::uint64_t seed);

Image apply_transform(const Image& img, const TransformSpec& spec, std::uint64_t seed);

/// Variant i is apply_transform(img, plan.specs[i], base_seed ^ i).
std::vector<Image> generate_variants(const Image& img, const AugmentationPlan& plan, std::uint64_t base_seed);

struct AugmentSummary {
  std::size_t source_images = 0;
  std::size_t written_images = 0;
  std::filesystem::path manifest_path;
};

/// Expands every manifest sample into 32 PNG files `<stem>_a<ii>.png` under
/// `out_dir` and writes `out_dir/manifest.json` listing them with the source
/// labels. The seed for the sample at manifest index j is `seed + j`.
AugmentSummary augment_dataset(const DatasetManifest& manifest, const std::filesystem::path& out_dir,
                               std::uint64_t seed, const AugmentationPlan& plan = AugmentationPlan::standard());

}  // namespace foodclf
