#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "foodclf/kernel.hpp"
#include "foodclf/pipeline.hpp"
#include "foodclf/svm.hpp"
#include "foodclf/synthetic.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace foodclf;

namespace {

FeatureMatrix xor4() {
  return FeatureMatrix(4, 2, {0, 0, 1, 1, 0, 1, 1, 0}, {0, 0, 1, 1}, {"A", "B"});
}

}  // namespace

TEST_CASE("kernel values") {
  const std::vector<float> a{1, 2}, b{3, 4};
  CHECK(kernel_eval(a, b, KernelSpec::linear()) == 11.0);
  CHECK(kernel_eval(a, a, KernelSpec::rbf(0.7)) == 1.0);
  // |a - b|^2 = 8 = 2 sigma^2 with sigma = 2.
  CHECK(kernel_eval(a, b, KernelSpec::rbf(2.0)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(KernelSpec::rbf(2.0).gamma() == doctest::Approx(0.125));
  CHECK_ERROR_CODE(kernel_eval(a, std::vector<float>{1, 2, 3}, KernelSpec::linear()), ErrorCode::DimensionMismatch);
  CHECK_ERROR_CODE(KernelSpec::rbf(0.0).validate(), ErrorCode::InvalidArgument);
}

TEST_CASE("default sigma follows the scale convention") {
  const FeatureMatrix x = oracle::random_features(30, 4, 2, 1);
  double mean = 0.0;
  for (float v : x.values) mean += v;
  mean /= static_cast<double>(x.values.size());
  double var = 0.0;
  for (float v : x.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.values.size());
  const KernelSpec spec = KernelSpec::rbf(default_rbf_sigma(x));
  CHECK(spec.gamma() == doctest::Approx(1.0 / (4.0 * var)).epsilon(1e-9));
}

TEST_CASE("rbf gram matrices are symmetric positive semidefinite") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const FeatureMatrix x = oracle::random_features(50, 3, 2, seed);
    KernelCache cache(x, KernelSpec::rbf(0.5 + static_cast<double>(seed)), 1 << 20);
    Eigen::MatrixXd gram(50, 50);
    for (std::size_t i = 0; i < 50; ++i) {
      const auto row = cache.row(i);
      for (std::size_t j = 0; j < 50; ++j) gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    CHECK((gram - gram.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("kernel cache rows agree with direct evaluation under a tiny budget") {
  const FeatureMatrix x = oracle::random_features(20, 3, 2, 9);
  const KernelSpec spec = KernelSpec::rbf(1.3);
  KernelCache cache(x, spec, 1);  // forces eviction on every miss
  for (std::size_t i : {3, 7, 3, 19, 0, 7}) {
    const auto row = cache.row(i);
    for (std::size_t j = 0; j < 20; ++j) CHECK(row[j] == doctest::Approx(kernel_eval(x.row(i), x.row(j), spec)).epsilon(1e-12));
    CHECK(cache.diagonal(i) == doctest::Approx(1.0));
  }
}

TEST_CASE("xor is separable with an rbf kernel") {
  const FeatureMatrix x = xor4();
  SvmParams p;
  p.c = 10.0;
  p.kernel = KernelSpec::rbf(0.5);
  const SvmModel m = svm_train(x, p);
  CHECK(svm_predict(m, x) == x.labels);
}

TEST_CASE("two points on a line split at the midpoint") {
  const FeatureMatrix x(2, 1, {-1, 1}, {0, 1}, {"neg", "pos"});
  SvmParams p;
  p.c = 1000.0;
  p.kernel = KernelSpec::linear();
  const SvmModel m = svm_train(x, p);
  const FeatureMatrix probe(2, 1, {-0.5F, 0.5F}, {0, 0});
  CHECK(svm_predict(m, probe) == std::vector<int>{0, 1});
  const auto dv = svm_decision_values(m, FeatureMatrix(1, 1, {0.0F}, {0}));
  CHECK(std::abs(dv[0]) < 1e-6);
  CHECK(std::abs(dv[1]) < 1e-6);
}

TEST_CASE("degenerate inputs") {
  const FeatureMatrix one_class(3, 1, {1, 2, 3}, {0, 0, 0}, {"only"});
  CHECK_ERROR_CODE(svm_train(one_class, {}), ErrorCode::DegenerateLabels);
  const FeatureMatrix empty_class(3, 1, {1, 2, 3}, {0, 0, 1}, {"a", "b", "c"});
  CHECK_ERROR_CODE(svm_train(empty_class, {}), ErrorCode::DegenerateLabels);
  CHECK_ERROR_CODE(svm_train(FeatureMatrix(1, 1, {1}, {0}, {"a", "b"}), {}), ErrorCode::TooFewSamples);
  const SvmModel m = svm_train(xor4(), {});
  CHECK(svm_predict(m, FeatureMatrix(0, 2, {}, {})).empty());
  CHECK_ERROR_CODE(svm_predict(m, FeatureMatrix(1, 3, {1, 2, 3}, {0})), ErrorCode::DimensionMismatch);
}

TEST_CASE("rbf decision value decays with distance from a lone support vector") {
  SvmModel m;
  m.params.kernel = KernelSpec::rbf(1.0);
  m.dim = 2;
  m.num_classes = 2;
  m.pool = {0.0F, 0.0F};
  BinaryMachine pos;
  pos.sv = {0};
  pos.coef = {1.0};
  pos.alpha = {1.0};
  pos.train_index = {0};
  BinaryMachine neg;
  m.machines = {pos, neg};
  double previous = 2.0;
  for (float r : {0.0F, 0.5F, 1.0F, 2.0F, 4.0F}) {
    const double v = svm_decision_values(m, FeatureMatrix(1, 2, {r, 0.0F}, {0}))[0];
    CHECK(v < previous);
    previous = v;
  }
}

TEST_CASE("trained machines satisfy the dual constraints") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    FeatureMatrix x = oracle::random_features(40, 3, 3, 100 + seed);
    for (std::size_t i = 0; i < x.rows; ++i) x.row(i)[0] += static_cast<float>(x.labels[i]);
    SvmParams p;
    p.c = seed % 2 == 0 ? 1.0 : 5.0;
    p.kernel = seed % 3 == 0 ? KernelSpec::linear() : KernelSpec::rbf(1.0);
    const SvmModel m = svm_train(x, p);
    REQUIRE(m.machines.size() == 3);
    for (std::size_t c = 0; c < 3; ++c) {
      const auto& mach = m.machines[c];
      CHECK(std::abs(std::accumulate(mach.coef.begin(), mach.coef.end(), 0.0)) <= 1e-8);
      for (double a : mach.alpha) {
        CHECK(a >= 0.0);
        CHECK(a <= p.c);
      }
      CHECK(oracle::kkt_violation(m, c, x, one_vs_rest_labels(x.labels, static_cast<int>(c)), p.c) <= p.tol);
    }
  }
}

TEST_CASE("prediction commutes with row permutation") {
  const FeatureMatrix blobs = gaussian_blobs(3, 15, 2, 4.0, 1.0, 5);
  const SvmModel m = svm_train(blobs, {});
  std::vector<std::size_t> perm(blobs.rows);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 gen(1);
  std::shuffle(perm.begin(), perm.end(), gen);
  const auto base = svm_predict(m, blobs);
  const auto permuted = svm_predict(m, blobs.select(perm));
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(permuted[i] == base[perm[i]]);
}

TEST_CASE("duplicating the training set leaves decisions unchanged") {
  const FeatureMatrix blobs = gaussian_blobs(3, 10, 2, 12.0, 1.0, 6);
  std::vector<std::size_t> twice(2 * blobs.rows);
  for (std::size_t i = 0; i < twice.size(); ++i) twice[i] = i % blobs.rows;
  SvmParams p;
  p.c = 1e4;
  p.kernel = KernelSpec::linear();
  const SvmModel a = svm_train(blobs, p);
  const SvmModel b = svm_train(blobs.select(twice), p);
  const FeatureMatrix probe = oracle::random_features(200, 2, 3, 7);
  FeatureMatrix scaled = probe;
  for (float& v : scaled.values) v *= 15.0F;
  CHECK(svm_predict(a, scaled) == svm_predict(b, scaled));
}

TEST_CASE("training is deterministic and independent of cache size") {
  const FeatureMatrix x = oracle::random_features(60, 4, 3, 8);
  SvmParams big;
  big.kernel = KernelSpec::rbf(1.5);
  SvmParams small = big;
  small.cache_bytes = 2 * 60 * sizeof(double);
  const SvmModel a = svm_train(x, big);
  const SvmModel b = svm_train(x, big);
  const SvmModel c = svm_train(x, small);
  CHECK(a.pool == b.pool);
  CHECK(svm_decision_values(a, x) == svm_decision_values(b, x));
  CHECK(svm_decision_values(a, x) == svm_decision_values(c, x));
}

TEST_CASE("ties in decision values go to the smaller class") {
  SvmModel m;
  m.params.kernel = KernelSpec::linear();
  m.dim = 1;
  m.num_classes = 3;
  m.machines.resize(3);
  for (auto& mach : m.machines) mach.bias = 0.25;
  CHECK(svm_predict(m, FeatureMatrix(1, 1, {3.0F}, {0})) == std::vector<int>{0});
}
