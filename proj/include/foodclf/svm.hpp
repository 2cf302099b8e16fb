#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "foodclf/features.hpp"
#include "foodclf/kernel.hpp"

namespace foodclf {

struct SvmParams {
  double c = 1.0;
  KernelSpec kernel;
  double tol = 1e-3;
  /// SMO iteration cap per binary machine; 0 picks max(10^7, 100 n).
  std::size_t max_iter = 0;
  /// Recorded for provenance. Working-set selection breaks ties toward the
  /// smaller index, so training does not consume randomness.
  std::uint64_t seed = 0;
  std::size_t cache_bytes = std::size_t{256} << 20;
};

/// One-vs-rest machine for a single class. Decision value is
/// sum_j coef[j] * K(pool[sv[j]], x) + bias.
struct BinaryMachine {
  std::vector<std::uint32_t> sv;       // indices into SvmModel::pool
  std::vector<double> coef;            // alpha_j * y_j
  std::vector<double> alpha;           // alpha_j, in (0, C]
  std::vector<std::uint32_t> train_index;  // training row of each support vector
  double bias = 0.0;
  std::size_t iterations = 0;
  /// Largest KKT violation measured by the solver at exit.
  double final_gap = 0.0;
};

struct SvmModel {
  SvmParams params;
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<float> pool;  // support vectors shared by all machines, rows of length dim
  std::vector<BinaryMachine> machines;

  std::size_t pool_size() const noexcept { return dim == 0 ? 0 : pool.size() / dim; }
  std::span<const float> pool_row(std::size_t i) const { return {pool.data() + i * dim, dim}; }
};

/// Trains one SMO machine per class (class vs rest). Each binary problem
/// uses second-order working-set selection and stops once the maximal
/// violating pair gap is at most `tol`.
SvmModel svm_train(const FeatureMatrix& x, const SvmParams& params);

/// n x K decision values, row-major.
std::vector<double> svm_decision_values(const SvmModel& model, const FeatureMatrix& x);
std::vector<int> svm_predict(const SvmModel& model, const FeatureMatrix& x);

/// Labels {+1, -1} for the class-vs-rest problem of class `positive`.
std::vector<int> one_vs_rest_labels(std::span<const int> labels, int positive);

}  // namespace foodclf
