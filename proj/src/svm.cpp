#include "foodclf/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "foodclf/error.hpp"

namespace foodclf {

namespace {

constexpr double kTau = 1e-12;

struct BinarySolution {
  std::vector<double> alpha;
  double bias = 0.0;
  std::size_t iterations = 0;
  double gap = 0.0;
};

class SmoSolver {
 public:
  SmoSolver(KernelCache& kernel, std::span<const int> y, double c, double tol, std::size_t max_iter)
      : kernel_(kernel), y_(y), c_(c), tol_(tol), max_iter_(max_iter), n_(y.size()) {}

  BinarySolution solve() {
    alpha_.assign(n_, 0.0);
    grad_.assign(n_, -1.0);
    BinarySolution out;
    std::size_t iter = 0;
    for (; iter < max_iter_; ++iter) {
      std::size_t i = 0;
      std::size_t j = 0;
      if (!select_working_set(i, j)) break;
      update_pair(i, j);
    }
    out.iterations = iter;
    out.gap = current_gap();
    out.bias = -compute_rho();
    out.alpha = std::move(alpha_);
    return out;
  }

 private:
  bool in_up(std::size_t t) const {
    return (y_[t] == +1 && alpha_[t] < c_) || (y_[t] == -1 && alpha_[t] > 0.0);
  }
  bool in_low(std::size_t t) const {
    return (y_[t] == +1 && alpha_[t] > 0.0) || (y_[t] == -1 && alpha_[t] < c_);
  }

  double current_gap() const {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n_; ++t) {
      const double v = -y_[t] * grad_[t];
      if (in_up(t)) g_max = std::max(g_max, v);
      if (in_low(t)) g_min = std::min(g_min, v);
    }
    if (!std::isfinite(g_max) || !std::isfinite(g_min)) return 0.0;
    return std::max(0.0, g_max - g_min);
  }

  // Second-order working set selection; ties go to the smaller index.
  bool select_working_set(std::size_t& out_i, std::size_t& out_j) {
    double g_max = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n_; ++t) {
      if (!in_up(t)) continue;
      const double v = -y_[t] * grad_[t];
      if (v > g_max) {
        g_max = v;
        i = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (i < 0) return false;
    const auto ii = static_cast<std::size_t>(i);
    const auto k_i = kernel_.row(ii);
    const double k_ii = kernel_.diagonal(ii);

    double g_min = std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    std::ptrdiff_t j = -1;
    for (std::size_t t = 0; t < n_; ++t) {
      if (!in_low(t)) continue;
      const double v = -y_[t] * grad_[t];
      g_min = std::min(g_min, v);
      const double b = g_max - v;
      if (b <= 0.0) continue;
      double a = k_ii + kernel_.diagonal(t) - 2.0 * k_i[t];
      if (a <= 0.0) a = kTau;
      const double obj = -(b * b) / a;
      if (obj < best_obj) {
        best_obj = obj;
        j = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (g_max - g_min <= tol_ || j < 0) return false;
    out_i = ii;
    out_j = static_cast<std::size_t>(j);
    return true;
  }

  void update_pair(std::size_t i, std::size_t j) {
    const auto k_i = kernel_.row(i);
    const auto k_j = kernel_.row(j);
    const double yi = y_[i];
    const double yj = y_[j];
    const double old_ai = alpha_[i];
    const double old_aj = alpha_[j];
    double ai = old_ai;
    double aj = old_aj;
    double quad = kernel_.diagonal(i) + kernel_.diagonal(j) - 2.0 * k_i[j];
    if (quad <= 0.0) quad = kTau;

    if (yi != yj) {
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = -diff; }
      }
      if (diff > 0.0) {
        if (ai > c_) { ai = c_; aj = c_ - diff; }
      } else {
        if (aj > c_) { aj = c_; ai = c_ + diff; }
      }
    } else {
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c_) {
        if (ai > c_) { ai = c_; aj = sum - c_; }
      } else {
        if (aj < 0.0) { aj = 0.0; ai = sum; }
      }
      if (sum > c_) {
        if (aj > c_) { aj = c_; ai = sum - c_; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = sum; }
      }
    }
    alpha_[i] = ai;
    alpha_[j] = aj;

    // Q_tk = y_t y_k K_tk
    const double di = (ai - old_ai) * yi;
    const double dj = (aj - old_aj) * yj;
    for (std::size_t t = 0; t < n_; ++t) {
      grad_[t] += y_[t] * (k_i[t] * di + k_j[t] * dj);
    }
  }

  double compute_rho() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n_; ++t) {
      const double yg = y_[t] * grad_[t];
      if (alpha_[t] >= c_) {
        if (y_[t] == -1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (alpha_[t] <= 0.0) {
        if (y_[t] == +1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    if (n_free > 0) return sum_free / static_cast<double>(n_free);
    if (!std::isfinite(ub)) return lb;
    if (!std::isfinite(lb)) return ub;
    return (ub + lb) / 2.0;
  }

  KernelCache& kernel_;
  std::span<const int> y_;
  double c_;
  double tol_;
  std::size_t max_iter_;
  std::size_t n_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
};

}  // namespace

std::vector<int> one_vs_rest_labels(std::span<const int> labels, int positive) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == positive ? +1 : -1;
  return out;
}

SvmModel svm_train(const FeatureMatrix& x, const SvmParams& params) {
  x.validate();
  params.kernel.validate();
  require(params.c > 0.0 && std::isfinite(params.c), ErrorCode::InvalidArgument, "C must be finite and > 0");
  require(params.tol > 0.0, ErrorCode::InvalidArgument, "tolerance must be > 0");
  require(x.rows >= 2, ErrorCode::TooFewSamples, "SVM training needs at least two samples");
  const std::size_t k = x.num_classes();
  std::vector<std::size_t> counts(std::max<std::size_t>(k, 1), 0);
  for (int l : x.labels) ++counts[static_cast<std::size_t>(l)];
  require(k >= 2, ErrorCode::DegenerateLabels, "SVM training needs at least two classes");
  for (std::size_t c = 0; c < k; ++c) {
    require(counts[c] > 0 && counts[c] < x.rows, ErrorCode::DegenerateLabels,
            "class " + std::to_string(c) + " has " + std::to_string(counts[c]) + " of " + std::to_string(x.rows) +
                " samples; every one-vs-rest problem needs both sides");
  }

  const std::size_t max_iter = params.max_iter > 0 ? params.max_iter : std::max<std::size_t>(10'000'000, 100 * x.rows);
  KernelCache cache(x, params.kernel, params.cache_bytes);

  SvmModel model;
  model.params = params;
  model.dim = x.cols;
  model.num_classes = k;
  std::map<std::size_t, std::uint32_t> pool_slot;

  for (std::size_t c = 0; c < k; ++c) {
    const auto y = one_vs_rest_labels(x.labels, static_cast<int>(c));
    SmoSolver solver(cache, y, params.c, params.tol, max_iter);
    BinarySolution sol = solver.solve();

    BinaryMachine m;
    m.bias = sol.bias;
    m.iterations = sol.iterations;
    m.final_gap = sol.gap;
    for (std::size_t t = 0; t < x.rows; ++t) {
      if (sol.alpha[t] <= 0.0) continue;
      auto [it, inserted] = pool_slot.try_emplace(t, static_cast<std::uint32_t>(pool_slot.size()));
      if (inserted) {
        const auto row = x.row(t);
        model.pool.insert(model.pool.end(), row.begin(), row.end());
      }
      m.sv.push_back(it->second);
      m.alpha.push_back(sol.alpha[t]);
      m.coef.push_back(sol.alpha[t] * y[t]);
      m.train_index.push_back(static_cast<std::uint32_t>(t));
    }
    if (!std::isfinite(m.bias)) fail(ErrorCode::NumericalFailure, "SVM bias is not finite");
    model.machines.push_back(std::move(m));
  }
  return model;
}

std::vector<double> svm_decision_values(const SvmModel& model, const FeatureMatrix& x) {
  require(x.rows == 0 || x.cols == model.dim, ErrorCode::DimensionMismatch,
          "SVM expects " + std::to_string(model.dim) + " features, got " + std::to_string(x.cols));
  const std::size_t k = model.machines.size();
  const std::size_t pool = model.pool_size();
  std::vector<double> out(x.rows * k, 0.0);
  std::vector<double> kvals(pool);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto xi = x.row(i);
    for (std::size_t p = 0; p < pool; ++p) kvals[p] = kernel_eval(model.pool_row(p), xi, model.params.kernel);
    for (std::size_t c = 0; c < k; ++c) {
      const BinaryMachine& m = model.machines[c];
      double f = m.bias;
      for (std::size_t s = 0; s < m.sv.size(); ++s) f += m.coef[s] * kvals[m.sv[s]];
      out[i * k + c] = f;
    }
  }
  return out;
}

std::vector<int> svm_predict(const SvmModel& model, const FeatureMatrix& x) {
  const auto values = svm_decision_values(model, x);
  const std::size_t k = model.machines.size();
  std::vector<int> labels(x.rows, 0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (values[i * k + c] > values[i * k + best]) best = c;
    }
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace foodclf
