#include <cstring>
#include <random>

#include "doctest.h"
#include "foodclf/binio.hpp"
#include "foodclf/convnet.hpp"
#include "foodclf/features.hpp"
#include "foodclf/synthetic.hpp"
#include "json.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace foodclf;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> dist(0.0F, 1.0F);
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = dist(gen);
  return t;
}

// Little-endian byte assembly independent of the library's writer.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t v = 0;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

std::vector<std::uint8_t> handmade_bundle(std::size_t in_channels_of_weight) {
  nlohmann::json header = {
      {"input", {{"c", 3}, {"h", 4}, {"w", 4}}},
      {"normalization", {{"mode", "mean_subtract"}, {"channel_means", {0.5, 0.25, 0.125}}}},
      {"layers",
       {{{"type", "conv2d"}, {"out_channels", 2}, {"kernel", 3}, {"weight", "w0"}, {"bias", "b0"}},
        {{"type", "relu"}},
        {{"type", "maxpool2d"}, {"size", 2}, {"stride", 2}},
        {{"type", "flatten"}}}},
      {"tensors", {"w0", "b0"}}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out{'F', 'W', 'B', '1'};
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.push_back(4);
  for (std::uint32_t d : {2u, static_cast<std::uint32_t>(in_channels_of_weight), 3u, 3u}) put_u32(out, d);
  for (std::size_t i = 0; i < 2 * in_channels_of_weight * 9; ++i) put_f32(out, 0.01F * static_cast<float>(i));
  out.push_back(1);
  put_u32(out, 2);
  put_f32(out, 0.5F);
  put_f32(out, -0.5F);
  return out;
}

WeightBundle identity_relu_bundle() {
  WeightBundle b;
  b.input = {1, 3, 3};
  Tensor w({1, 1, 3, 3});
  w.values()[4] = 1.0F;
  b.add_tensor("w", w);
  b.add_tensor("b", Tensor({1}));
  b.layers = {LayerSpec::conv(1, "w", "b"), LayerSpec::relu(), LayerSpec::flatten()};
  return b;
}

}  // namespace

TEST_CASE("tensor construction is validated") {
  CHECK_ERROR_CODE(Tensor({2, 0}), ErrorCode::ShapeMismatch);
  CHECK_ERROR_CODE(Tensor({2, 2}, std::vector<float>(3)), ErrorCode::ShapeMismatch);
  CHECK(Tensor({2, 3}).size() == 6);
}

TEST_CASE("convolution of ones sums the window") {
  const Tensor x({1, 3, 3}, 1.0F);
  const Tensor w({1, 1, 3, 3}, 1.0F);
  const Tensor out = conv2d_forward(x, w, Tensor({1}), 1, 0);
  REQUIRE(out.shape() == std::vector<std::size_t>{1, 1, 1});
  CHECK(out[0] == 9.0F);
}

TEST_CASE("identity kernel with padding reproduces the input") {
  const Tensor x = random_tensor({2, 5, 6}, 1);
  Tensor w({2, 2, 3, 3});
  for (std::size_t c = 0; c < 2; ++c) w.values()[((c * 2 + c) * 3 + 1) * 3 + 1] = 1.0F;
  CHECK(conv2d_forward(x, w, Tensor({2}), 1, 1) == x);
}

TEST_CASE("convolution matches the direct oracle") {
  const Tensor x = random_tensor({3, 8, 8}, 2);
  const Tensor w = random_tensor({4, 3, 3, 3}, 3);
  const Tensor b = random_tensor({4}, 4);
  for (std::size_t stride : {1, 2, 3}) {
    for (std::size_t pad : {0, 1}) {
      std::size_t oh = 0, ow = 0;
      const auto want = oracle::conv2d(x, w, b, stride, pad, oh, ow);
      const Tensor got = conv2d_forward(x, w, b, stride, pad);
      REQUIRE(got.shape() == std::vector<std::size_t>{4, oh, ow});
      for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("convolution shape errors") {
  const Tensor x = random_tensor({3, 4, 4}, 5);
  CHECK_ERROR_CODE(conv2d_forward(x, Tensor({2, 2, 3, 3}), Tensor({2}), 1, 1), ErrorCode::ShapeMismatch);
  CHECK_ERROR_CODE(conv2d_forward(x, Tensor({2, 3, 3, 3}), Tensor({3}), 1, 1), ErrorCode::ShapeMismatch);
  CHECK_ERROR_CODE(conv2d_forward(x, Tensor({2, 3, 7, 7}), Tensor({2}), 1, 0), ErrorCode::ShapeMismatch);
}

TEST_CASE("max pooling") {
  const Tensor x({1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  CHECK(maxpool2d_forward(x) == Tensor({1, 1, 1}, std::vector<float>{4}));
  CHECK(maxpool2d_forward(Tensor({2, 4, 6}, 3.5F)) == Tensor({2, 2, 3}, 3.5F));
  const Tensor r = random_tensor({3, 8, 8}, 6);
  const Tensor p = maxpool2d_forward(r);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < 4; ++y) {
      for (std::size_t x2 = 0; x2 < 4; ++x2) {
        const float m = std::max({r.at(c, 2 * y, 2 * x2), r.at(c, 2 * y, 2 * x2 + 1), r.at(c, 2 * y + 1, 2 * x2),
                                  r.at(c, 2 * y + 1, 2 * x2 + 1)});
        CHECK(p.at(c, y, x2) == m);
      }
    }
  }
  CHECK_ERROR_CODE(maxpool2d_forward(Tensor({1, 3, 4})), ErrorCode::ShapeMismatch);
}

TEST_CASE("relu is idempotent and flatten is channel-major") {
  const Tensor x = random_tensor({2, 3, 3}, 7);
  const Tensor r = relu_forward(x);
  CHECK(relu_forward(r) == r);
  for (float v : r.values()) CHECK(v >= 0.0F);
  const Tensor f = flatten_forward(Tensor({3, 2, 2}, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}));
  REQUIRE(f.shape() == std::vector<std::size_t>{12});
  for (std::size_t i = 0; i < 12; ++i) CHECK(f[i] == static_cast<float>(i));
}

TEST_CASE("single flatten bundle returns the input values") {
  WeightBundle b;
  b.input = {3, 2, 2};
  b.layers = {LayerSpec::flatten()};
  std::vector<float> v(12);
  for (std::size_t i = 0; i < 12; ++i) v[i] = static_cast<float>(i) - 5.0F;
  CHECK(forward(b, Tensor({3, 2, 2}, v)).values() == v);
}

TEST_CASE("relu clamps a negative through an identity conv") {
  const WeightBundle b = identity_relu_bundle();
  const Tensor out = forward(b, Tensor({1, 3, 3}, std::vector<float>{1, -1, 2, 3, 4, -5, 6, 7, 8}));
  CHECK(out.values() == std::vector<float>{1, 0, 2, 3, 4, 0, 6, 7, 8});
  CHECK_ERROR_CODE(forward(b, Tensor({1, 4, 4})), ErrorCode::ShapeMismatch);
}

TEST_CASE("bundle validation names the offending layer") {
  WeightBundle b = identity_relu_bundle();
  b.layers.insert(b.layers.begin() + 1, LayerSpec::maxpool());
  try {
    (void)b.validate();
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BundleShapeInvalid);
    CHECK(e.detail().find("layer 1") != std::string::npos);
  }
  WeightBundle no_flatten = identity_relu_bundle();
  no_flatten.layers.pop_back();
  CHECK_ERROR_CODE(no_flatten.validate(), ErrorCode::BundleShapeInvalid);
  WeightBundle early_flatten = identity_relu_bundle();
  early_flatten.layers.insert(early_flatten.layers.begin(), LayerSpec::flatten());
  CHECK_ERROR_CODE(early_flatten.validate(), ErrorCode::BundleShapeInvalid);
  WeightBundle even_kernel = identity_relu_bundle();
  even_kernel.layers[0].kernel = 2;
  CHECK_ERROR_CODE(even_kernel.validate(), ErrorCode::BundleShapeInvalid);
}

TEST_CASE("vgg16 preset shapes") {
  const WeightBundle b = vgg16_64_preset(0);
  const auto shapes = b.validate();
  CHECK(b.output_dim() == 2048);
  std::size_t convs = 0;
  for (const auto& l : b.layers) convs += l.kind == LayerKind::Conv2d;
  CHECK(convs == 13);
  CHECK(b.tensor("block1_conv1.weight").shape() == std::vector<std::size_t>{64, 3, 3, 3});
  CHECK(b.tensor("block5_conv3.weight").shape() == std::vector<std::size_t>{512, 512, 3, 3});
  std::vector<std::size_t> spatial;
  for (std::size_t i = 0; i < b.layers.size(); ++i) {
    if (b.layers[i].kind == LayerKind::MaxPool2d) spatial.push_back(shapes[i][1]);
  }
  CHECK(spatial == std::vector<std::size_t>{32, 16, 8, 4, 2});
  CHECK(shapes.back() == std::vector<std::size_t>{2048});
}

TEST_CASE("forward is deterministic and finite") {
  const WeightBundle b = tiny_preset(4);
  const Tensor x = random_tensor({3, 16, 16}, 8);
  const Tensor a = forward(b, x);
  CHECK(a.size() == 128);
  CHECK(forward(b, x) == a);
  CHECK(a.all_finite());
  CHECK(tiny_preset(4) == b);
  CHECK(!(tiny_preset(5) == b));
}

TEST_CASE("weight bundle round trips") {
  testing::TempDir dir;
  WeightBundle b = tiny_preset(9);
  b.normalization.mode = NormalizationMode::MeanSubtract;
  b.normalization.channel_means = {0.485F, 0.456F, 0.406F};
  save_weight_bundle(dir / "tiny.fwb", b);
  CHECK(load_weight_bundle(dir / "tiny.fwb") == b);
  const auto bytes = serialize_weight_bundle(b);
  CHECK(serialize_weight_bundle(parse_weight_bundle(bytes)) == bytes);
}

TEST_CASE("independently assembled FWB1 bytes parse") {
  const WeightBundle b = parse_weight_bundle(handmade_bundle(3));
  CHECK(b.input == InputSpec{3, 4, 4});
  CHECK(b.normalization.mode == NormalizationMode::MeanSubtract);
  CHECK(b.normalization.channel_means[2] == 0.125F);
  CHECK(b.layers.size() == 4);
  CHECK(b.tensor("w0").shape() == std::vector<std::size_t>{2, 3, 3, 3});
  CHECK(b.tensor("w0")[53] == doctest::Approx(0.53F));
  CHECK(b.tensor("b0")[1] == -0.5F);
  CHECK(b.output_dim() == 8);
  CHECK(serialize_weight_bundle(b).size() == handmade_bundle(3).size());
}

TEST_CASE("FWB1 parse errors") {
  CHECK_ERROR_CODE(parse_weight_bundle(handmade_bundle(4)), ErrorCode::BundleShapeInvalid);
  try {
    (void)parse_weight_bundle(handmade_bundle(4));
  } catch (const Error& e) {
    CHECK(e.detail().find("layer 0") != std::string::npos);
  }
  auto bytes = handmade_bundle(3);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_ERROR_CODE(parse_weight_bundle(truncated), ErrorCode::BundleParse);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_ERROR_CODE(parse_weight_bundle(trailing), ErrorCode::BundleParse);
  auto magic = bytes;
  magic[3] = '2';
  CHECK_ERROR_CODE(parse_weight_bundle(magic), ErrorCode::BundleParse);
  auto header = bytes;
  header[8] = '[';
  CHECK_ERROR_CODE(parse_weight_bundle(header), ErrorCode::BundleParse);
  CHECK_ERROR_CODE(parse_weight_bundle(std::vector<std::uint8_t>{}), ErrorCode::BundleParse);
}

TEST_CASE("feature matrix basics") {
  FeatureMatrix fm(3, 2, {1, 2, 3, 4, 5, 6}, {0, 1, 0}, {"a", "b"});
  CHECK(fm.num_classes() == 2);
  const std::vector<std::size_t> idx{2, 2, 0};
  const FeatureMatrix s = fm.select(idx);
  CHECK(s.values == std::vector<float>{5, 6, 5, 6, 1, 2});
  CHECK(s.labels == std::vector<int>{0, 0, 0});
  CHECK_ERROR_CODE(FeatureMatrix(2, 2, {1, 2, 3}, {0, 0}), ErrorCode::ShapeMismatch);
  FeatureMatrix bad = fm;
  bad.labels[1] = 2;
  CHECK_ERROR_CODE(bad.validate(), ErrorCode::InvalidArgument);
  bad = fm;
  bad.values[0] = std::nanf("");
  CHECK_ERROR_CODE(bad.validate(), ErrorCode::NumericalFailure);
}

TEST_CASE("concat_rows adds counts") {
  const FeatureMatrix a = oracle::random_features(4829 % 97, 5, 3, 1);
  const FeatureMatrix b = oracle::random_features(9280 % 89, 5, 3, 2);
  const FeatureMatrix m = concat_rows(a, b);
  CHECK(m.rows == a.rows + b.rows);
  CHECK(m.row(a.rows)[0] == b.row(0)[0]);
  CHECK_ERROR_CODE(concat_rows(a, oracle::random_features(3, 4, 3, 3)), ErrorCode::DimensionMismatch);
}

TEST_CASE("FMX1 layout and round trip") {
  testing::TempDir dir;
  FeatureMatrix fm(2, 3, {1.5F, -2, 3, 4, 5, 6.25F}, {1, 0}, {"x", "y"});
  fm.source = "unit";
  fm.seed = 42;
  const auto bytes = serialize_features(fm);
  REQUIRE(bytes.size() > 4 + 4 + 4 + 24 + 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "FMX1");
  CHECK(bytes[4] == 2);
  CHECK(bytes[8] == 3);
  float first = 0;
  std::memcpy(&first, bytes.data() + 12, 4);
  CHECK(first == 1.5F);
  CHECK(bytes[36] == 1);
  CHECK(bytes[37] == 0);
  const auto trailer = nlohmann::json::parse(std::string(bytes.begin() + 40, bytes.end()));
  CHECK(trailer.at("classes") == nlohmann::json({"x", "y"}));
  CHECK(trailer.at("source") == "unit");
  CHECK(trailer.at("seed") == 42);
  save_features(dir / "f.fmx", fm);
  CHECK(load_features(dir / "f.fmx") == fm);
  auto broken = bytes;
  broken.resize(20);
  CHECK_ERROR_CODE(parse_features(broken), ErrorCode::FeatureParse);
  auto bad_trailer = bytes;
  bad_trailer.back() = '?';
  CHECK_ERROR_CODE(parse_features(bad_trailer), ErrorCode::FeatureParse);
}

TEST_CASE("extract_features over a manifest") {
  testing::TempDir dir;
  const DatasetManifest m = write_texture_corpus(dir / "c", {3, 2, 20, 5});
  const WeightBundle b = tiny_preset(1);
  const FeatureMatrix fm = extract_features(m, b);
  CHECK(fm.rows == 6);
  CHECK(fm.cols == 128);
  CHECK(fm.labels == std::vector<int>{0, 0, 1, 1, 2, 2});
  CHECK(fm.class_names == m.class_names);
  const Image third = read_image(m.resolve(m.samples[3]));
  const Tensor direct = image_features(third, b, b.normalization);
  for (std::size_t j = 0; j < 128; ++j) CHECK(fm.row(3)[j] == direct[j]);

  DatasetManifest empty = m;
  empty.samples.clear();
  const FeatureMatrix none = extract_features(empty, b);
  CHECK(none.rows == 0);
  CHECK(none.cols == 128);

  DatasetManifest missing = m;
  missing.samples.push_back({"nope.png", 0});
  try {
    (void)extract_features(missing, b);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("nope.png") != std::string::npos);
  }
}

TEST_CASE("vgg16 features of a manifest are 2048 wide") {
  testing::TempDir dir;
  const DatasetManifest m = write_texture_corpus(dir / "c", {2, 1, 64, 6});
  const FeatureMatrix fm = extract_features(m, vgg16_64_preset(2));
  CHECK(fm.rows == 2);
  CHECK(fm.cols == 2048);
  fm.validate();
}
