#include "foodclf/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "foodclf/error.hpp"

namespace foodclf {

double RegressionTree::predict(std::span<const float> x) const {
  std::size_t node = 0;
  while (nodes[node].feature >= 0) {
    const Node& n = nodes[node];
    node = static_cast<std::size_t>(static_cast<double>(x[static_cast<std::size_t>(n.feature)]) < n.threshold ? n.left
                                                                                                              : n.right);
  }
  return nodes[node].value;
}

std::size_t RegressionTree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

namespace {

constexpr double kMinHessian = 1e-16;

// Column-major copy of the features with every column pre-sorted.
struct SortedColumns {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<std::uint32_t> order;  // d x n row ids
  std::vector<float> values;         // d x n values in sorted order

  explicit SortedColumns(const FeatureMatrix& x) : n(x.rows), d(x.cols), order(n * d), values(n * d) {
    std::vector<std::uint32_t> idx(n);
    for (std::size_t f = 0; f < d; ++f) {
      std::iota(idx.begin(), idx.end(), 0U);
      std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        return x.values[a * d + f] < x.values[b * d + f];
      });
      for (std::size_t k = 0; k < n; ++k) {
        order[f * n + k] = idx[k];
        values[f * n + k] = x.values[idx[k] * d + f];
      }
    }
  }
};

double structure_score(double g, double h, double lambda) { return g * g / (h + lambda); }

RegressionTree grow_tree(const FeatureMatrix& x, const SortedColumns& cols, std::span<const double> grad, std::span<const double> hess,
                         const GbdtParams& params) {
  const std::size_t n = cols.n;
  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<std::int32_t> node_of(n, 0);
  std::vector<std::size_t> frontier{0};

  struct Stats {
    double g = 0.0;
    double h = 0.0;
  };
  struct Best {
    bool valid = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = -std::numeric_limits<double>::infinity();
  };

  for (std::size_t depth = 0; depth <= params.max_depth && !frontier.empty(); ++depth) {
    // Totals for every frontier node.
    std::vector<std::int32_t> slot(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < frontier.size(); ++s) slot[frontier[s]] = static_cast<std::int32_t>(s);
    std::vector<Stats> total(frontier.size());
    for (std::size_t r = 0; r < n; ++r) {
      const std::int32_t s = node_of[r] >= 0 ? slot[static_cast<std::size_t>(node_of[r])] : -1;
      if (s < 0) continue;
      total[static_cast<std::size_t>(s)].g += grad[r];
      total[static_cast<std::size_t>(s)].h += hess[r];
    }
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      tree.nodes[frontier[s]].value = -total[s].g / (total[s].h + params.lambda);
    }
    if (depth == params.max_depth) break;

    std::vector<Best> best(frontier.size());
    std::vector<Stats> left(frontier.size());
    std::vector<float> last(frontier.size());
    std::vector<bool> seen(frontier.size());
    for (std::size_t f = 0; f < cols.d; ++f) {
      std::fill(left.begin(), left.end(), Stats{});
      std::fill(seen.begin(), seen.end(), false);
      const std::uint32_t* order = cols.order.data() + f * n;
      const float* values = cols.values.data() + f * n;
      for (std::size_t k = 0; k < n; ++k) {
        const std::uint32_t r = order[k];
        const std::int32_t node = node_of[r];
        if (node < 0) continue;
        const std::int32_t si = slot[static_cast<std::size_t>(node)];
        if (si < 0) continue;
        const auto s = static_cast<std::size_t>(si);
        const float v = values[k];
        if (seen[s] && v > last[s]) {
          const Stats& l = left[s];
          const double gr = total[s].g - l.g;
          const double hr = total[s].h - l.h;
          const double gain = 0.5 * (structure_score(l.g, l.h, params.lambda) + structure_score(gr, hr, params.lambda) -
                                     structure_score(total[s].g, total[s].h, params.lambda)) -
                              params.gamma;
          if (gain > best[s].gain) {
            best[s] = {true, f, (static_cast<double>(last[s]) + static_cast<double>(v)) / 2.0, gain};
          }
        }
        left[s].g += grad[r];
        left[s].h += hess[r];
        last[s] = v;
        seen[s] = true;
      }
    }

    std::vector<std::size_t> next;
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      if (!best[s].valid || !(best[s].gain > 0.0)) continue;
      const std::size_t id = frontier[s];
      const auto left_id = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[id];
      node.feature = static_cast<std::int32_t>(best[s].feature);
      node.threshold = best[s].threshold;
      node.gain = best[s].gain;
      node.left = left_id;
      node.right = left_id + 1;
      node.value = 0.0;
      next.push_back(static_cast<std::size_t>(left_id));
      next.push_back(static_cast<std::size_t>(left_id + 1));
    }
    if (next.empty()) break;
    for (std::size_t r = 0; r < n; ++r) {
      if (node_of[r] < 0) continue;
      const auto& node = tree.nodes[static_cast<std::size_t>(node_of[r])];
      if (node.feature < 0) {
        node_of[r] = -1;
        continue;
      }
      const double v = x.values[r * x.cols + static_cast<std::size_t>(node.feature)];
      node_of[r] = v < node.threshold ? node.left : node.right;
    }
    frontier = std::move(next);
  }
  return tree;
}

double softmax_loss(std::span<const double> scores, std::span<const int> labels, std::size_t k,
                    std::vector<double>& prob) {
  const std::size_t n = labels.size();
  prob.resize(n * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* s = scores.data() + i * k;
    const double top = *std::max_element(s, s + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(s[c] - top);
    for (std::size_t c = 0; c < k; ++c) prob[i * k + c] = std::exp(s[c] - top) / z;
    loss += -(s[static_cast<std::size_t>(labels[i])] - top - std::log(z));
  }
  return n == 0 ? 0.0 : loss / static_cast<double>(n);
}

}  // namespace

GbdtModel gbdt_train(const FeatureMatrix& x, const GbdtParams& params) {
  x.validate();
  require(params.learning_rate > 0.0 && std::isfinite(params.learning_rate), ErrorCode::InvalidArgument,
          "learning rate must be finite and > 0");
  require(params.lambda >= 0.0 && params.gamma >= 0.0, ErrorCode::InvalidArgument, "lambda and gamma must be >= 0");
  require(x.rows >= 2, ErrorCode::TooFewSamples, "boosting needs at least two samples");
  const std::size_t k = x.num_classes();
  require(k >= 2, ErrorCode::DegenerateLabels, "boosting needs at least two classes");

  GbdtModel model;
  model.params = params;
  model.dim = x.cols;
  model.num_classes = k;
  model.base_score = 0.0;

  const std::size_t n = x.rows;
  const SortedColumns cols(x);
  std::vector<double> scores(n * k, model.base_score);
  std::vector<double> prob;
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  model.loss_trace.push_back(softmax_loss(scores, x.labels, k, prob));

  for (std::size_t round = 0; round < params.rounds; ++round) {
    // Gradients for the whole round come from the scores at its start.
    const std::vector<double> round_prob = prob;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = round_prob[i * k + c];
        grad[i] = p - (x.labels[i] == static_cast<int>(c) ? 1.0 : 0.0);
        hess[i] = std::max(p * (1.0 - p), kMinHessian);
      }
      RegressionTree tree = grow_tree(x, cols, grad, hess, params);
      for (std::size_t i = 0; i < n; ++i) scores[i * k + c] += params.learning_rate * tree.predict(x.row(i));
      model.trees.push_back(std::move(tree));
    }
    const double loss = softmax_loss(scores, x.labels, k, prob);
    if (!std::isfinite(loss)) fail(ErrorCode::NumericalFailure, "boosting loss became non-finite");
    model.loss_trace.push_back(loss);
  }
  return model;
}

std::vector<double> gbdt_scores(const GbdtModel& model, const FeatureMatrix& x) {
  require(x.rows == 0 || x.cols == model.dim, ErrorCode::DimensionMismatch,
          "boosting model expects " + std::to_string(model.dim) + " features, got " + std::to_string(x.cols));
  const std::size_t k = model.num_classes;
  std::vector<double> scores(x.rows * k, model.base_score);
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const std::size_t c = t % k;
    for (std::size_t i = 0; i < x.rows; ++i) {
      scores[i * k + c] += model.params.learning_rate * model.trees[t].predict(x.row(i));
    }
  }
  return scores;
}

std::vector<double> gbdt_predict_proba(const GbdtModel& model, const FeatureMatrix& x) {
  auto scores = gbdt_scores(model, x);
  const std::size_t k = model.num_classes;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double* s = scores.data() + i * k;
    const double top = *std::max_element(s, s + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += (s[c] = std::exp(s[c] - top));
    for (std::size_t c = 0; c < k; ++c) s[c] /= z;
  }
  return scores;
}

std::vector<int> gbdt_predict(const GbdtModel& model, const FeatureMatrix& x) {
  const auto scores = gbdt_scores(model, x);
  const std::size_t k = model.num_classes;
  std::vector<int> labels(x.rows, 0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (scores[i * k + c] > scores[i * k + best]) best = c;
    }
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace foodclf
