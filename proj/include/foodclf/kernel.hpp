#pragma once

#include <cstddef>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

#include "foodclf/features.hpp"

namespace foodclf {

enum class KernelKind { Linear, Rbf };

/// RBF uses exp(-|x - x'|^2 / (2 sigma^2)).
struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double sigma = 1.0;

  static KernelSpec linear() { return {KernelKind::Linear, 1.0}; }
  static KernelSpec rbf(double sigma) { return {KernelKind::Rbf, sigma}; }

  double gamma() const noexcept { return 1.0 / (2.0 * sigma * sigma); }
  void validate() const;
  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

double kernel_eval(std::span<const float> a, std::span<const float> b, const KernelSpec& spec);

/// sigma for which gamma = 1 / (D * Var(X)), variance over every entry.
double default_rbf_sigma(const FeatureMatrix& x);

/// Lazily computed kernel rows over a fixed sample set with an LRU byte
/// budget. Rows depend only on the samples, so one cache serves every
/// one-vs-rest machine trained on the same matrix. Not thread-safe.
class KernelCache {
 public:
  KernelCache(const FeatureMatrix& x, KernelSpec spec, std::size_t budget_bytes);

  std::size_t size() const noexcept { return n_; }
  /// K(x_i, x_j) for every j. The two most recently returned rows stay
  /// valid until the next call.
  std::span<const double> row(std::size_t i);
  double diagonal(std::size_t i) const noexcept { return diag_[i]; }

 private:
  void compute_row(std::size_t i, std::vector<double>& out) const;

  const FeatureMatrix& x_;
  KernelSpec spec_;
  std::size_t n_;
  std::size_t max_rows_;
  std::vector<double> norms_;
  std::vector<double> diag_;
  std::list<std::size_t> lru_;
  struct Entry {
    std::vector<double> values;
    std::list<std::size_t>::iterator position;
  };
  std::unordered_map<std::size_t, Entry> rows_;
};

}  // namespace foodclf
