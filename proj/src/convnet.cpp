#include "foodclf/convnet.hpp"

#include <algorithm>
#include <cmath>

#include "foodclf/binio.hpp"
#include "foodclf/error.hpp"
#include "foodclf/rng.hpp"
#include "json.hpp"

namespace foodclf {

using nlohmann::json;
using Shape = std::vector<std::size_t>;

LayerSpec LayerSpec::conv(std::size_t out_channels, std::string weight, std::string bias, std::size_t kernel) {
  LayerSpec s;
  s.kind = LayerKind::Conv2d;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.weight_name = std::move(weight);
  s.bias_name = std::move(bias);
  return s;
}

void WeightBundle::add_tensor(const std::string& name, Tensor t) {
  if (!tensors.contains(name)) tensor_order.push_back(name);
  tensors[name] = std::move(t);
}

const Tensor& WeightBundle::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail(ErrorCode::BundleShapeInvalid, "missing tensor '" + name + "'");
  return it->second;
}

std::vector<Shape> WeightBundle::validate() const {
  auto invalid = [](std::size_t layer, const std::string& what) {
    fail(ErrorCode::BundleShapeInvalid, "layer " + std::to_string(layer) + ": " + what);
  };
  require(input.channels >= 1 && input.height >= 1 && input.width >= 1, ErrorCode::BundleShapeInvalid,
          "input dims must be >= 1");
  normalization.validate();
  require(!layers.empty(), ErrorCode::BundleShapeInvalid, "bundle has no layers");

  for (const auto& name : tensor_order) {
    require(tensors.contains(name), ErrorCode::BundleShapeInvalid, "tensor '" + name + "' declared but absent");
  }
  require(tensor_order.size() == tensors.size(), ErrorCode::BundleShapeInvalid,
          "tensor map and declared order disagree");

  std::vector<Shape> shapes;
  Shape shape{input.channels, input.height, input.width};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& layer = layers[i];
    const bool last = i + 1 == layers.size();
    if (layer.kind != LayerKind::Flatten && shape.size() != 3) invalid(i, "expects a (C,H,W) activation");
    switch (layer.kind) {
      case LayerKind::Conv2d: {
        if (layer.kernel % 2 == 0) invalid(i, "conv kernel must be odd");
        if (layer.out_channels == 0) invalid(i, "conv needs at least one output channel");
        auto w = tensors.find(layer.weight_name);
        auto b = tensors.find(layer.bias_name);
        if (w == tensors.end()) invalid(i, "weight tensor '" + layer.weight_name + "' not found");
        if (b == tensors.end()) invalid(i, "bias tensor '" + layer.bias_name + "' not found");
        const Shape expected_w{layer.out_channels, shape[0], layer.kernel, layer.kernel};
        if (w->second.shape() != expected_w) {
          invalid(i, "weight '" + layer.weight_name + "' has shape " + shape_string(w->second.shape()) +
                         ", expected " + shape_string(expected_w));
        }
        if (b->second.shape() != Shape{layer.out_channels}) {
          invalid(i, "bias '" + layer.bias_name + "' has shape " + shape_string(b->second.shape()) +
                         ", expected (" + std::to_string(layer.out_channels) + ")");
        }
        shape = {layer.out_channels, shape[1], shape[2]};
        break;
      }
      case LayerKind::Relu:
        break;
      case LayerKind::MaxPool2d:
        if (shape[1] % 2 != 0 || shape[2] % 2 != 0) {
          invalid(i, "max-pool input " + shape_string(shape) + " has odd spatial dims");
        }
        shape = {shape[0], shape[1] / 2, shape[2] / 2};
        break;
      case LayerKind::Flatten:
        if (!last) invalid(i, "flatten must be the final layer");
        shape = {shape_product(shape)};
        break;
    }
    shapes.push_back(shape);
  }
  if (layers.back().kind != LayerKind::Flatten) invalid(layers.size() - 1, "final layer must be flatten");
  return shapes;
}

std::size_t WeightBundle::output_dim() const { return validate().back().front(); }

// ---- kernels -----------------------------------------------------------------

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  require(x.rank() == 3, ErrorCode::ShapeMismatch, "conv input must be (C,H,W), got " + shape_string(x.shape()));
  require(w.rank() == 4, ErrorCode::ShapeMismatch, "conv weight must be (O,C,k,k), got " + shape_string(w.shape()));
  require(stride >= 1, ErrorCode::ShapeMismatch, "conv stride must be >= 1");
  const std::size_t channels = x.dim(0);
  const std::size_t height = x.dim(1);
  const std::size_t width = x.dim(2);
  const std::size_t out_channels = w.dim(0);
  const std::size_t kh = w.dim(2);
  const std::size_t kw = w.dim(3);
  require(w.dim(1) == channels, ErrorCode::ShapeMismatch,
          "conv weight " + shape_string(w.shape()) + " does not match input " + shape_string(x.shape()));
  require(b.rank() == 1 && b.dim(0) == out_channels, ErrorCode::ShapeMismatch,
          "conv bias " + shape_string(b.shape()) + " does not match " + std::to_string(out_channels) + " filters");
  require(height + 2 * pad >= kh && width + 2 * pad >= kw, ErrorCode::ShapeMismatch,
          "conv kernel larger than padded input");

  const std::size_t out_h = (height + 2 * pad - kh) / stride + 1;
  const std::size_t out_w = (width + 2 * pad - kw) / stride + 1;
  Tensor out({out_channels, out_h, out_w});

  // Output index i reads input row i*stride + u - pad; this gives the range of
  // i for which that row lies inside the image.
  auto valid_range = [stride, pad](std::size_t offset, std::size_t extent, std::size_t n_out) {
    const auto s = static_cast<std::int64_t>(stride);
    const auto shift = static_cast<std::int64_t>(offset) - static_cast<std::int64_t>(pad);
    std::int64_t lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
    std::int64_t hi = (static_cast<std::int64_t>(extent) - 1 - shift);
    hi = hi < 0 ? -1 : hi / s;
    hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(n_out) - 1);
    return std::pair<std::int64_t, std::int64_t>{lo, hi};
  };

  std::vector<double> acc(out_h * out_w);
  const float* xd = x.data().data();
  const float* wd = w.data().data();
  for (std::size_t o = 0; o < out_channels; ++o) {
    std::fill(acc.begin(), acc.end(), static_cast<double>(b[o]));
    for (std::size_t c = 0; c < channels; ++c) {
      const float* plane = xd + c * height * width;
      for (std::size_t u = 0; u < kh; ++u) {
        const auto [i_lo, i_hi] = valid_range(u, height, out_h);
        for (std::size_t v = 0; v < kw; ++v) {
          const double weight = wd[((o * channels + c) * kh + u) * kw + v];
          if (weight == 0.0) continue;
          const auto [j_lo, j_hi] = valid_range(v, width, out_w);
          for (std::int64_t i = i_lo; i <= i_hi; ++i) {
            const float* row = plane + (static_cast<std::size_t>(i) * stride + u - pad) * width;
            double* dst = acc.data() + static_cast<std::size_t>(i) * out_w;
            if (stride == 1) {
              for (std::int64_t j = j_lo; j <= j_hi; ++j) {
                dst[j] += weight * row[static_cast<std::size_t>(j) + v - pad];
              }
            } else {
              for (std::int64_t j = j_lo; j <= j_hi; ++j) {
                dst[j] += weight * row[static_cast<std::size_t>(j) * stride + v - pad];
              }
            }
          }
        }
      }
    }
    float* dst = out.data().data() + o * out_h * out_w;
    for (std::size_t k = 0; k < acc.size(); ++k) dst[k] = static_cast<float>(acc[k]);
  }
  return out;
}

Tensor relu_forward(const Tensor& x) {
  Tensor out = x;
  for (float& v : out.data()) v = v > 0.0F ? v : 0.0F;
  return out;
}

Tensor maxpool2d_forward(const Tensor& x) {
  require(x.rank() == 3, ErrorCode::ShapeMismatch, "max-pool input must be (C,H,W), got " + shape_string(x.shape()));
  const std::size_t channels = x.dim(0);
  const std::size_t height = x.dim(1);
  const std::size_t width = x.dim(2);
  require(height % 2 == 0 && width % 2 == 0, ErrorCode::ShapeMismatch,
          "max-pool needs even spatial dims, got " + shape_string(x.shape()));
  Tensor out({channels, height / 2, width / 2});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < height / 2; ++i) {
      for (std::size_t j = 0; j < width / 2; ++j) {
        out.at(c, i, j) = std::max({x.at(c, 2 * i, 2 * j), x.at(c, 2 * i, 2 * j + 1), x.at(c, 2 * i + 1, 2 * j),
                                    x.at(c, 2 * i + 1, 2 * j + 1)});
      }
    }
  }
  return out;
}

Tensor flatten_forward(const Tensor& x) { return Tensor({x.size()}, x.values()); }

Tensor forward_traced(const WeightBundle& bundle, const Tensor& x, std::vector<Shape>& shapes) {
  const Shape expected{bundle.input.channels, bundle.input.height, bundle.input.width};
  require(x.shape() == expected, ErrorCode::ShapeMismatch,
          "input " + shape_string(x.shape()) + " does not match bundle input " + shape_string(expected));
  shapes.clear();
  Tensor act = x;
  for (std::size_t i = 0; i < bundle.layers.size(); ++i) {
    const LayerSpec& layer = bundle.layers[i];
    try {
      switch (layer.kind) {
        case LayerKind::Conv2d:
          act = conv2d_forward(act, bundle.tensor(layer.weight_name), bundle.tensor(layer.bias_name), 1, layer.pad());
          break;
        case LayerKind::Relu: act = relu_forward(act); break;
        case LayerKind::MaxPool2d: act = maxpool2d_forward(act); break;
        case LayerKind::Flatten: act = flatten_forward(act); break;
      }
    } catch (const Error& e) {
      throw e.with_context("layer " + std::to_string(i));
    }
    shapes.push_back(act.shape());
  }
  if (act.rank() != 1) act = flatten_forward(act);
  return act;
}

Tensor forward(const WeightBundle& bundle, const Tensor& x) {
  std::vector<Shape> shapes;
  return forward_traced(bundle, x, shapes);
}

// ---- FWB1 ----------------------------------------------------------------------

namespace {

constexpr std::string_view kBundleMagic = "FWB1";

std::string layer_type_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool2d: return "maxpool2d";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

nlohmann::ordered_json normalization_to_json(const NormalizationSpec& norm) {
  nlohmann::ordered_json j;
  j["mode"] = norm.mode == NormalizationMode::Unit ? "unit" : "mean_subtract";
  j["channel_means"] = norm.channel_means;
  return j;
}

NormalizationSpec normalization_from_json(const json& j) {
  NormalizationSpec norm;
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "unit") {
    norm.mode = NormalizationMode::Unit;
  } else if (mode == "mean_subtract" || mode == "mean") {
    norm.mode = NormalizationMode::MeanSubtract;
  } else {
    fail(ErrorCode::BundleParse, "unknown normalization mode '" + mode + "'");
  }
  if (j.contains("channel_means")) norm.channel_means = j.at("channel_means").get<std::array<float, 3>>();
  return norm;
}

}  // namespace

std::vector<std::uint8_t> serialize_weight_bundle(const WeightBundle& bundle) {
  bundle.validate();
  nlohmann::ordered_json header;
  header["input"] = {{"c", bundle.input.channels}, {"h", bundle.input.height}, {"w", bundle.input.width}};
  header["normalization"] = normalization_to_json(bundle.normalization);
  auto layers = nlohmann::ordered_json::array();
  for (const auto& layer : bundle.layers) {
    nlohmann::ordered_json l;
    l["type"] = layer_type_name(layer.kind);
    if (layer.kind == LayerKind::Conv2d) {
      l["out_channels"] = layer.out_channels;
      l["kernel"] = layer.kernel;
      l["weight"] = layer.weight_name;
      l["bias"] = layer.bias_name;
    } else if (layer.kind == LayerKind::MaxPool2d) {
      l["size"] = 2;
      l["stride"] = 2;
    }
    layers.push_back(std::move(l));
  }
  header["layers"] = std::move(layers);
  header["tensors"] = bundle.tensor_order;
  const std::string header_text = header.dump();

  binio::Writer out;
  out.text(kBundleMagic);
  out.u32(static_cast<std::uint32_t>(header_text.size()));
  out.text(header_text);
  for (const auto& name : bundle.tensor_order) {
    const Tensor& t = bundle.tensors.at(name);
    out.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) out.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data()) out.f32(v);
  }
  return std::move(out).take();
}

WeightBundle parse_weight_bundle(std::span<const std::uint8_t> bytes) {
  binio::Reader in(bytes, ErrorCode::BundleParse);
  in.expect_magic(kBundleMagic);
  const std::uint32_t header_len = in.u32();
  const std::string header_text = in.text(header_len);

  WeightBundle bundle;
  try {
    const json header = json::parse(header_text);
    const auto& input = header.at("input");
    bundle.input = {input.at("c").get<std::size_t>(), input.at("h").get<std::size_t>(),
                    input.at("w").get<std::size_t>()};
    if (header.contains("normalization")) bundle.normalization = normalization_from_json(header.at("normalization"));
    for (const auto& l : header.at("layers")) {
      const auto type = l.at("type").get<std::string>();
      if (type == "conv2d") {
        bundle.layers.push_back(LayerSpec::conv(l.at("out_channels").get<std::size_t>(), l.at("weight").get<std::string>(),
                                                l.at("bias").get<std::string>(), l.value("kernel", std::size_t{3})));
      } else if (type == "relu") {
        bundle.layers.push_back(LayerSpec::relu());
      } else if (type == "maxpool2d") {
        if (l.value("size", 2) != 2 || l.value("stride", 2) != 2) {
          fail(ErrorCode::BundleParse, "only 2x2 stride-2 max pooling is supported");
        }
        bundle.layers.push_back(LayerSpec::maxpool());
      } else if (type == "flatten") {
        bundle.layers.push_back(LayerSpec::flatten());
      } else {
        fail(ErrorCode::BundleParse, "unknown layer type '" + type + "'");
      }
    }
    bundle.tensor_order = header.at("tensors").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::BundleParse, std::string("bad header: ") + e.what());
  }

  for (const auto& name : bundle.tensor_order) {
    const std::size_t ndim = in.u8();
    require(ndim >= 1, ErrorCode::BundleParse, "tensor '" + name + "' has rank 0");
    Shape shape(ndim);
    for (auto& d : shape) {
      d = in.u32();
      require(d >= 1, ErrorCode::BundleParse, "tensor '" + name + "' has a zero dimension");
    }
    const std::size_t count = shape_product(shape);
    require(count <= in.remaining() / 4, ErrorCode::BundleParse, "tensor '" + name + "' data is truncated");
    std::vector<float> values(count);
    for (auto& v : values) v = in.f32();
    require(bundle.tensors.emplace(name, Tensor(std::move(shape), std::move(values))).second,
            ErrorCode::BundleParse, "tensor '" + name + "' declared twice");
  }
  require(in.remaining() == 0, ErrorCode::BundleParse,
          std::to_string(in.remaining()) + " trailing bytes after the last tensor");
  bundle.validate();
  return bundle;
}

WeightBundle load_weight_bundle(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path);
  try {
    return parse_weight_bundle(bytes);
  } catch (const Error& e) {
    throw e.with_context(path.string());
  }
}

void save_weight_bundle(const std::filesystem::path& path, const WeightBundle& bundle) {
  binio::write_file(path, serialize_weight_bundle(bundle));
}

// ---- presets ---------------------------------------------------------------------

namespace {

WeightBundle conv_stack_preset(InputSpec input, const std::vector<std::vector<std::size_t>>& blocks, std::uint64_t seed) {
  WeightBundle bundle;
  bundle.input = input;
  Rng rng(seed);
  std::size_t in_channels = input.channels;
  for (std::size_t blk = 0; blk < blocks.size(); ++blk) {
    for (std::size_t j = 0; j < blocks[blk].size(); ++j) {
      const std::size_t out_channels = blocks[blk][j];
      const std::string base = "block" + std::to_string(blk + 1) + "_conv" + std::to_string(j + 1);
      Tensor w({out_channels, in_channels, 3, 3});
      const double stddev = std::sqrt(2.0 / static_cast<double>(in_channels * 9));
      for (float& v : w.data()) v = static_cast<float>(rng.normal() * stddev);
      bundle.add_tensor(base + ".weight", std::move(w));
      bundle.add_tensor(base + ".bias", Tensor({out_channels}, 0.0F));
      bundle.layers.push_back(LayerSpec::conv(out_channels, base + ".weight", base + ".bias"));
      bundle.layers.push_back(LayerSpec::relu());
      in_channels = out_channels;
    }
    bundle.layers.push_back(LayerSpec::maxpool());
  }
  bundle.layers.push_back(LayerSpec::flatten());
  bundle.validate();
  return bundle;
}

}  // namespace

WeightBundle vgg16_64_preset(std::uint64_t seed) {
  return conv_stack_preset({3, 64, 64}, {{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}}, seed);
}

WeightBundle tiny_preset(std::uint64_t seed) { return conv_stack_preset({3, 16, 16}, {{8}, {8}}, seed); }

}  // namespace foodclf
