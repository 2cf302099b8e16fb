#include <cmath>
#include <numeric>

#include "doctest.h"
#include "foodclf/mlp.hpp"
#include "foodclf/pipeline.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace foodclf;

namespace {

FeatureMatrix and_gate() { return FeatureMatrix(4, 2, {0, 0, 0, 1, 1, 0, 1, 1}, {0, 0, 0, 1}, {"off", "on"}); }

double max_gradient_error(const MlpModel& model, const FeatureMatrix& x, const DropoutMasks* masks, double step) {
  const MlpLossGradient lg = mlp_loss_gradient(model, x, masks);
  double worst = 0.0;
  for (std::size_t p = 0; p < model.parameters.size(); ++p) {
    MlpModel plus = model, minus = model;
    plus.parameters[p] += step;
    minus.parameters[p] -= step;
    const double numeric = (mlp_loss(plus, x, masks) - mlp_loss(minus, x, masks)) / (2.0 * step);
    const double denom = std::max({std::abs(numeric), std::abs(lg.gradient[p]), 1e-7});
    worst = std::max(worst, std::abs(numeric - lg.gradient[p]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("parameter layout") {
  MlpParams p;
  p.hidden1 = 5;
  p.hidden2 = 4;
  const MlpModel m = mlp_init(3, 6, p);
  CHECK(m.sizes == std::array<std::size_t, 4>{3, 5, 4, 6});
  CHECK(m.parameters.size() == 5 * 3 + 5 + 4 * 5 + 4 + 6 * 4 + 6);
  CHECK(m.weight_offset(1) == 20);
  CHECK(m.bias_offset(2) == 20 + 24 + 24);
  p.output = MlpOutput::ReluRegression;
  CHECK(mlp_init(3, 6, p).sizes[3] == 1);
}

TEST_CASE("architecture checks") {
  MlpParams p;
  p.hidden1 = 0;
  CHECK_ERROR_CODE(mlp_init(3, 2, p), ErrorCode::ArchMismatch);
  p.hidden1 = 4;
  p.dropout = {1.0, 0.0};
  CHECK_ERROR_CODE(mlp_init(3, 2, p), ErrorCode::ArchMismatch);
  p.dropout = {0.0, 0.0};
  CHECK_ERROR_CODE(mlp_init(3, 1, p), ErrorCode::ArchMismatch);
  const MlpModel m = mlp_init(3, 2, p);
  CHECK_ERROR_CODE(mlp_predict(m, FeatureMatrix(1, 2, {1, 2}, {0})), ErrorCode::DimensionMismatch);
}

TEST_CASE("analytic gradients match finite differences") {
  for (int trial = 0; trial < 8; ++trial) {
    MlpParams p;
    p.hidden1 = 3 + trial % 3;
    p.hidden2 = 2 + trial % 4;
    p.dropout = {0.2 * (trial % 3), 0.3 * (trial % 2)};
    p.output = trial % 2 == 0 ? MlpOutput::Softmax : MlpOutput::ReluRegression;
    p.seed = static_cast<std::uint64_t>(trial);
    const FeatureMatrix x = oracle::random_features(5, 4, 3, 40 + static_cast<std::uint64_t>(trial));
    MlpModel m = mlp_init(4, 3, p);
    if (p.output == MlpOutput::ReluRegression) m.parameters[m.bias_offset(2)] = 2.0;
    const DropoutMasks masks = make_dropout_masks(m, x.rows, 99);
    CHECK(max_gradient_error(m, x, &masks, 1e-5) < 1e-4);
    CHECK(max_gradient_error(m, x, nullptr, 1e-5) < 1e-4);
  }
}

TEST_CASE("dropout masks are inverted and seeded") {
  MlpParams p;
  p.hidden1 = 50;
  p.hidden2 = 40;
  p.dropout = {0.5, 0.25};
  const MlpModel m = mlp_init(3, 2, p);
  const DropoutMasks a = make_dropout_masks(m, 20, 7);
  CHECK(a.first.size() == 20 * 50);
  CHECK(a.second.size() == 20 * 40);
  std::size_t kept = 0;
  for (double v : a.first) {
    CHECK((v == 0.0 || v == doctest::Approx(2.0)));
    kept += v != 0.0;
  }
  CHECK(kept > 400);
  CHECK(kept < 600);
  for (double v : a.second) CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
  const DropoutMasks b = make_dropout_masks(m, 20, 7);
  CHECK(a.first == b.first);
}

TEST_CASE("training without dropout is bit-for-bit reproducible") {
  MlpParams p;
  p.hidden1 = 8;
  p.hidden2 = 6;
  p.dropout = {0.0, 0.0};
  p.epochs = 20;
  p.batch_size = 4;
  p.seed = 3;
  const FeatureMatrix x = oracle::random_features(30, 3, 3, 5);
  const MlpModel a = mlp_train(x, p);
  const MlpModel b = mlp_train(x, p);
  CHECK(a.parameters == b.parameters);
  CHECK(a.loss_trace == b.loss_trace);
  p.dropout = {0.5, 0.5};
  CHECK(mlp_train(x, p).parameters == mlp_train(x, p).parameters);
}

TEST_CASE("a small network learns AND") {
  MlpParams p;
  p.hidden1 = 8;
  p.hidden2 = 8;
  p.dropout = {0.0, 0.0};
  p.epochs = 2000;
  p.batch_size = 4;
  p.learning_rate = 0.5;
  p.seed = 1;
  const FeatureMatrix x = and_gate();
  const MlpModel m = mlp_train(x, p);
  CHECK(mlp_predict(m, x) == x.labels);
  CHECK(m.loss_trace.back() < m.loss_trace.front());
}

TEST_CASE("softmax outputs are distributions") {
  MlpParams p;
  p.hidden1 = 6;
  p.hidden2 = 5;
  const FeatureMatrix x = oracle::random_features(10, 4, 3, 6);
  const MlpModel m = mlp_init(4, 3, p);
  const auto out = mlp_outputs(m, x);
  REQUIRE(out.size() == 30);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(out[3 * i] + out[3 * i + 1] + out[3 * i + 2] == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(mlp_predict(m, FeatureMatrix(0, 4, {}, {})).empty());
}

TEST_CASE("regression head rounds to the nearest class") {
  MlpParams p;
  p.hidden1 = 2;
  p.hidden2 = 2;
  p.output = MlpOutput::ReluRegression;
  MlpModel m = mlp_init(1, 4, p);
  std::fill(m.parameters.begin(), m.parameters.end(), 0.0);
  const std::size_t bias = m.bias_offset(2);
  const std::pair<double, int> cases[] = {{0.0, 0}, {0.49, 0}, {0.5, 0}, {0.51, 1}, {1.5, 1}, {2.7, 3}, {9.0, 3}};
  for (auto [value, label] : cases) {
    m.parameters[bias] = value;
    CHECK(mlp_predict(m, FeatureMatrix(1, 1, {0.0F}, {0})) == std::vector<int>{label});
  }
  m.parameters[bias] = -3.0;
  CHECK(mlp_outputs(m, FeatureMatrix(1, 1, {0.0F}, {0}))[0] == 0.0);
}

TEST_CASE("prediction commutes with row permutation") {
  MlpParams p;
  p.hidden1 = 6;
  p.hidden2 = 4;
  const FeatureMatrix x = oracle::random_features(12, 3, 3, 8);
  const MlpModel m = mlp_init(3, 3, p);
  std::vector<std::size_t> perm(12);
  std::iota(perm.rbegin(), perm.rend(), std::size_t{0});
  const auto base = mlp_predict(m, x);
  const auto permuted = mlp_predict(m, x.select(perm));
  for (std::size_t i = 0; i < 12; ++i) CHECK(permuted[i] == base[perm[i]]);
}
