#include "foodclf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "foodclf/error.hpp"

namespace foodclf {

std::size_t shape_product(std::span<const std::size_t> shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Tensor::Tensor(std::vector<std::size_t> shape, float fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
  require(std::none_of(shape_.begin(), shape_.end(), [](std::size_t d) { return d == 0; }),
          ErrorCode::ShapeMismatch, "tensor dims must be >= 1, got " + shape_string(shape_));
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(std::none_of(shape_.begin(), shape_.end(), [](std::size_t d) { return d == 0; }),
          ErrorCode::ShapeMismatch, "tensor dims must be >= 1, got " + shape_string(shape_));
  require(data_.size() == shape_product(shape_), ErrorCode::ShapeMismatch,
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
              shape_string(shape_));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace foodclf
