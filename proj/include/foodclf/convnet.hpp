#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "foodclf/image.hpp"
#include "foodclf/tensor.hpp"

namespace foodclf {

enum class LayerKind { Conv2d, Relu, MaxPool2d, Flatten };

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  // conv2d only
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::string weight_name;
  std::string bias_name;

  static LayerSpec conv(std::size_t out_channels, std::string weight, std::string bias, std::size_t kernel = 3);
  static LayerSpec relu() {
    LayerSpec s;
    s.kind = LayerKind::Relu;
    return s;
  }
  static LayerSpec maxpool() {
    LayerSpec s;
    s.kind = LayerKind::MaxPool2d;
    return s;
  }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
  }

  std::size_t pad() const noexcept { return (kernel - 1) / 2; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct InputSpec {
  std::size_t channels = 3;
  std::size_t height = 64;
  std::size_t width = 64;
  friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

/// Feed-forward network description plus its parameters. Immutable once
/// validated; safe to share across threads.
struct WeightBundle {
  InputSpec input;
  NormalizationSpec normalization;
  std::vector<LayerSpec> layers;
  /// Tensor names in serialization order.
  std::vector<std::string> tensor_order;
  std::map<std::string, Tensor> tensors;

  void add_tensor(const std::string& name, Tensor t);
  const Tensor& tensor(const std::string& name) const;

  /// Propagates the input shape through every layer. Throws
  /// BundleShapeInvalid naming the first offending layer. Returns the
  /// activation shape after each layer.
  std::vector<std::vector<std::size_t>> validate() const;
  std::size_t output_dim() const;

  friend bool operator==(const WeightBundle&, const WeightBundle&) = default;
};

// ---- layer kernels ---------------------------------------------------------

/// Direct convolution with zero padding; inner products accumulate in double.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad);
Tensor relu_forward(const Tensor& x);
/// 2x2 / stride-2 max pooling. Odd spatial dims raise ShapeMismatch.
Tensor maxpool2d_forward(const Tensor& x);
Tensor flatten_forward(const Tensor& x);

/// Runs every layer in order; returns the rank-1 output.
Tensor forward(const WeightBundle& bundle, const Tensor& x);

/// Per-layer activation shapes recorded while running `forward`.
Tensor forward_traced(const WeightBundle& bundle, const Tensor& x,
                      std::vector<std::vector<std::size_t>>& shapes);

// ---- FWB1 serialization -----------------------------------------------------

std::vector<std::uint8_t> serialize_weight_bundle(const WeightBundle& bundle);
WeightBundle parse_weight_bundle(std::span<const std::uint8_t> bytes);
WeightBundle load_weight_bundle(const std::filesystem::path& path);
void save_weight_bundle(const std::filesystem::path& path, const WeightBundle& bundle);

// ---- presets ------------------------------------------------------------------

/// VGG16 convolutional trunk (13 conv layers in 5 blocks) for 3x64x64 input,
/// flattened after block5 pooling into 2048 features. Weights are He-normal
/// draws from `seed`; real pretrained weights are loaded from an FWB1 file.
WeightBundle vgg16_64_preset(std::uint64_t seed);

/// Two conv blocks (8 channels each) for 3x16x16 input: 128 features.
WeightBundle tiny_preset(std::uint64_t seed);

}  // namespace foodclf
