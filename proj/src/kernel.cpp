#include "foodclf/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "foodclf/error.hpp"

namespace foodclf {

void KernelSpec::validate() const {
  if (kind == KernelKind::Rbf) {
    require(std::isfinite(sigma) && sigma > 0.0, ErrorCode::InvalidArgument, "rbf sigma must be finite and > 0");
  }
}

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) sum += static_cast<double>(a[j]) * static_cast<double>(b[j]);
  return sum;
}

}  // namespace

double kernel_eval(std::span<const float> a, std::span<const float> b, const KernelSpec& spec) {
  require(a.size() == b.size(), ErrorCode::DimensionMismatch,
          "kernel arguments have dimensions " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  if (spec.kind == KernelKind::Linear) return dot(a, b);
  double dist = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    dist += d * d;
  }
  return std::exp(-dist * spec.gamma());
}

double default_rbf_sigma(const FeatureMatrix& x) {
  const std::size_t count = x.values.size();
  if (count == 0) return 1.0;
  double mean = 0.0;
  for (float v : x.values) mean += v;
  mean /= static_cast<double>(count);
  double var = 0.0;
  for (float v : x.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(count);
  if (!(var > 0.0)) return 1.0;
  // gamma = 1 / (D var)  <=>  sigma = sqrt(D var / 2)
  return std::sqrt(static_cast<double>(x.cols) * var / 2.0);
}

KernelCache::KernelCache(const FeatureMatrix& x, KernelSpec spec, std::size_t budget_bytes)
    : x_(x), spec_(spec), n_(x.rows) {
  spec_.validate();
  const std::size_t row_bytes = std::max<std::size_t>(1, n_ * sizeof(double));
  max_rows_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
  norms_.resize(n_);
  diag_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    norms_[i] = dot(x.row(i), x.row(i));
    diag_[i] = spec_.kind == KernelKind::Linear ? norms_[i] : 1.0;
  }
}

void KernelCache::compute_row(std::size_t i, std::vector<double>& out) const {
  out.resize(n_);
  const auto xi = x_.row(i);
  const double gamma = spec_.gamma();
  for (std::size_t j = 0; j < n_; ++j) {
    const double ip = dot(xi, x_.row(j));
    if (spec_.kind == KernelKind::Linear) {
      out[j] = ip;
    } else {
      const double dist = std::max(0.0, norms_[i] + norms_[j] - 2.0 * ip);
      out[j] = i == j ? 1.0 : std::exp(-gamma * dist);
    }
  }
}

std::span<const double> KernelCache::row(std::size_t i) {
  auto it = rows_.find(i);
  if (it != rows_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second.position);
    return it->second.values;
  }
  std::vector<double> values;
  if (rows_.size() >= max_rows_) {
    const std::size_t victim = lru_.back();
    lru_.pop_back();
    auto node = rows_.extract(victim);
    values = std::move(node.mapped().values);
  }
  compute_row(i, values);
  lru_.push_front(i);
  auto& entry = rows_[i];
  entry.values = std::move(values);
  entry.position = lru_.begin();
  return entry.values;
}

}  // namespace foodclf
