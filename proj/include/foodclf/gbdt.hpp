#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "foodclf/features.hpp"

namespace foodclf {

struct GbdtParams {
  std::size_t rounds = 100;
  double learning_rate = 0.1;
  std::size_t max_depth = 4;
  double lambda = 1.0;  // L2 penalty on leaf weights
  double gamma = 0.0;   // minimum gain to keep a split
  std::uint64_t seed = 0;
};

/// Flat binary tree. Internal nodes send x[feature] < threshold left.
struct RegressionTree {
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;  // leaf weight
    double gain = 0.0;   // split gain (internal nodes)
  };
  std::vector<Node> nodes;

  double predict(std::span<const float> x) const;
  std::size_t depth() const;
};

struct GbdtModel {
  GbdtParams params;
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  double base_score = 0.0;
  /// rounds x num_classes trees, round-major.
  std::vector<RegressionTree> trees;
  /// Mean softmax cross-entropy on the training set: entry 0 before any
  /// tree, entry r after round r.
  std::vector<double> loss_trace;

  std::size_t rounds() const noexcept { return num_classes == 0 ? 0 : trees.size() / num_classes; }
  const RegressionTree& tree(std::size_t round, std::size_t cls) const { return trees[round * num_classes + cls]; }
};

/// Softmax multiclass boosting: each round fits one tree per class to the
/// first and second derivatives of the cross-entropy. Trees grow level by
/// level with exact greedy search; a split's gain is
/// 1/2 [GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)] - gamma and it is
/// kept only when positive. Thresholds are midpoints between consecutive
/// distinct values; ties go to the lower feature, then the lower threshold.
GbdtModel gbdt_train(const FeatureMatrix& x, const GbdtParams& params);

/// n x K raw scores, row-major.
std::vector<double> gbdt_scores(const GbdtModel& model, const FeatureMatrix& x);
/// n x K softmax probabilities.
std::vector<double> gbdt_predict_proba(const GbdtModel& model, const FeatureMatrix& x);
std::vector<int> gbdt_predict(const GbdtModel& model, const FeatureMatrix& x);

}  // namespace foodclf
