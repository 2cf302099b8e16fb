#include "foodclf/clusterval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "foodclf/error.hpp"
#include "foodclf/rng.hpp"
#include "json.hpp"

namespace foodclf {

namespace {

double squared_distance(std::span<const float> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = static_cast<double>(a[j]) - b[j];
    sum += d * d;
  }
  return sum;
}

double euclidean(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

struct Restart {
  std::vector<double> centroids;
  std::vector<int> assignment;
  std::vector<double> trace;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

std::vector<double> kmeanspp_init(const FeatureMatrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  std::vector<double> centroids(k * d);
  auto set_centroid = [&](std::size_t c, std::size_t row) {
    const auto r = x.row(row);
    std::copy(r.begin(), r.end(), centroids.begin() + static_cast<std::ptrdiff_t>(c * d));
  };

  set_centroid(0, static_cast<std::size_t>(rng.below(n)));
  std::vector<double> closest(n);
  for (std::size_t i = 0; i < n; ++i) closest[i] = squared_distance(x.row(i), {centroids.data(), d});

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : closest) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double running = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        running += closest[i];
        if (running > target && closest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    set_centroid(c, pick);
    const std::span<const double> fresh{centroids.data() + c * d, d};
    for (std::size_t i = 0; i < n; ++i) closest[i] = std::min(closest[i], squared_distance(x.row(i), fresh));
  }
  return centroids;
}

// Assigns every point to its nearest centroid; returns inertia.
double assign(const FeatureMatrix& x, std::size_t k, const std::vector<double>& centroids, std::vector<int>& assignment,
              std::vector<double>& distances) {
  const std::size_t d = x.cols;
  double inertia = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double dist = squared_distance(x.row(i), {centroids.data() + c * d, d});
      if (dist < best) {
        best = dist;
        best_c = static_cast<int>(c);
      }
    }
    assignment[i] = best_c;
    distances[i] = best;
    inertia += best;
  }
  return inertia;
}

Restart lloyd(const FeatureMatrix& x, std::size_t k, std::vector<double> centroids, const KMeansOptions& options) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  Restart r;
  r.assignment.assign(n, -1);
  std::vector<double> distances(n);
  std::vector<int> previous;
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    previous = r.assignment;
    r.inertia = assign(x, k, centroids, r.assignment, distances);
    r.trace.push_back(r.inertia);
    r.iterations = iter + 1;
    if (iter > 0 && previous == r.assignment) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(r.assignment[i]);
      ++counts[c];
      const auto row = x.row(i);
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += row[j];
    }

    std::vector<double> updated(k * d);
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < d; ++j) updated[c * d + j] = sums[c * d + j] / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point that is farthest from the
      // centroid it is currently assigned to.
      std::size_t far = 0;
      double far_dist = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && distances[i] > far_dist) {
          far_dist = distances[i];
          far = i;
        }
      }
      taken[far] = true;
      distances[far] = 0.0;
      const auto row = x.row(far);
      std::copy(row.begin(), row.end(), updated.begin() + static_cast<std::ptrdiff_t>(c * d));
    }

    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double shift = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double delta = updated[c * d + j] - centroids[c * d + j];
        shift += delta * delta;
      }
      max_shift = std::max(max_shift, std::sqrt(shift));
    }
    centroids = std::move(updated);
    if (max_shift < options.tol) {
      // Final assignment against the converged centroids.
      r.inertia = assign(x, k, centroids, r.assignment, distances);
      r.trace.push_back(r.inertia);
      break;
    }
  }
  r.centroids = std::move(centroids);
  return r;
}

}  // namespace

int KMeansModel::predict(std::span<const float> x) const {
  require(x.size() == dim, ErrorCode::DimensionMismatch, "point dimension differs from centroids");
  double best = std::numeric_limits<double>::infinity();
  int best_c = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double dist = squared_distance(x, centroid(c));
    if (dist < best) {
      best = dist;
      best_c = static_cast<int>(c);
    }
  }
  return best_c;
}

KMeansModel kmeans_fit(const FeatureMatrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  require(k >= 1, ErrorCode::InvalidArgument, "k must be >= 1");
  require(x.rows >= k, ErrorCode::TooFewSamples,
          std::to_string(x.rows) + " samples cannot form " + std::to_string(k) + " clusters");
  require(options.n_init >= 1 && options.max_iter >= 1, ErrorCode::InvalidArgument, "n_init and max_iter must be >= 1");

  Rng rng(seed);
  Restart best;
  bool have_best = false;
  for (std::size_t run = 0; run < options.n_init; ++run) {
    Restart r = lloyd(x, k, kmeanspp_init(x, k, rng), options);
    if (!have_best || r.inertia < best.inertia) {
      best = std::move(r);
      have_best = true;
    }
  }
  if (!std::isfinite(best.inertia)) fail(ErrorCode::NumericalFailure, "k-means inertia is not finite");

  KMeansModel model;
  model.k = k;
  model.dim = x.cols;
  model.centroids = std::move(best.centroids);
  model.assignment = std::move(best.assignment);
  model.inertia = best.inertia;
  model.iterations_run = best.iterations;
  model.inertia_trace = std::move(best.trace);
  return model;
}

std::vector<double> silhouette_samples(const FeatureMatrix& x, std::span<const int> labels) {
  require(labels.size() == x.rows, ErrorCode::LengthMismatch, "one cluster label per row is required");
  std::unordered_map<int, std::size_t> dense;
  std::vector<std::size_t> cluster(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto [it, inserted] = dense.try_emplace(labels[i], dense.size());
    cluster[i] = it->second;
  }
  const std::size_t k = dense.size();
  require(k >= 2, ErrorCode::SingleCluster, "silhouette needs at least two distinct clusters");

  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t c : cluster) ++sizes[c];

  std::vector<double> out(x.rows, 0.0);
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const std::size_t own = cluster[i];
    if (sizes[own] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < x.rows; ++j) {
      if (j != i) sums[cluster[j]] += euclidean(x.row(i), x.row(j));
    }
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    out[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return out;
}

double silhouette_mean(const FeatureMatrix& x, std::span<const int> labels) {
  const auto values = silhouette_samples(x, labels);
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::string SilhouetteReport::to_json() const {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json scores = nlohmann::ordered_json::object();
  for (const auto& [k, s] : per_k) scores[std::to_string(k)] = s;
  doc["per_k"] = std::move(scores);
  doc["best_k"] = best_k;
  return doc.dump(2) + "\n";
}

SilhouetteReport k_sweep(const FeatureMatrix& x, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                         const KMeansOptions& options) {
  require(k_min >= 2 && k_min <= k_max, ErrorCode::InvalidArgument, "k range must satisfy 2 <= k_min <= k_max");
  require(x.rows >= k_max, ErrorCode::TooFewSamples,
          std::to_string(x.rows) + " samples cannot be swept up to k = " + std::to_string(k_max));
  SilhouetteReport report;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = k_min; k <= k_max; ++k) {
    const KMeansModel model = kmeans_fit(x, k, seed, options);
    const double score = silhouette_mean(x, model.assignment);
    report.per_k[k] = score;
    if (score > best) {
      best = score;
      report.best_k = k;
    }
  }
  return report;
}

}  // namespace foodclf
