#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "foodclf/tensor.hpp"

namespace foodclf {

/// Decoded 8-bit RGB raster, row-major, interleaved channels.
class Image {
 public:
  static constexpr std::uint32_t kChannels = 3;

  Image() = default;
  /// Constant-color image.
  Image(std::uint32_t width, std::uint32_t height, std::array<std::uint8_t, 3> fill = {0, 0, 0});
  Image(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> pixels);

  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::span<std::uint8_t> pixels() noexcept { return pixels_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

  std::uint8_t& at(std::uint32_t x, std::uint32_t y, std::uint32_t c) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  std::uint8_t at(std::uint32_t x, std::uint32_t y, std::uint32_t c) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

enum class NormalizationMode { Unit, MeanSubtract };

/// How 8-bit pixels become network inputs. `Unit` divides by 255;
/// `MeanSubtract` additionally subtracts a per-channel mean in [0, 1].
struct NormalizationSpec {
  NormalizationMode mode = NormalizationMode::Unit;
  std::array<float, 3> channel_means{0.0F, 0.0F, 0.0F};

  void validate() const;
  friend bool operator==(const NormalizationSpec&, const NormalizationSpec&) = default;
};

/// Decodes PNG or baseline JPEG bytes into RGB. Grayscale is replicated over
/// three channels and alpha is dropped.
Image decode_image(std::span<const std::uint8_t> bytes);
Image read_image(const std::filesystem::path& path);

/// Lossless 8-bit RGB PNG encoding.
std::vector<std::uint8_t> encode_png(const Image& img);
void write_png(const std::filesystem::path& path, const Image& img);

/// Bilinear resampling with source coordinate (dst + 0.5) * scale - 0.5,
/// clamped to the source extent, rounded half-up back to 8 bits.
Image resize_bilinear(const Image& img, std::uint32_t out_w, std::uint32_t out_h);

/// (3, H, W) tensor under the given normalization.
Tensor image_to_tensor(const Image& img, const NormalizationSpec& norm = {});

}  // namespace foodclf
