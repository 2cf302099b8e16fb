#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "foodclf/features.hpp"

namespace foodclf {

struct KMeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-4;
  std::size_t n_init = 10;
};

struct KMeansModel {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;  // k x dim
  std::vector<int> assignment;    // one cluster id per training row
  double inertia = 0.0;
  std::size_t iterations_run = 0;
  /// Inertia after each assignment step of the winning restart.
  std::vector<double> inertia_trace;

  std::span<const double> centroid(std::size_t c) const { return {centroids.data() + c * dim, dim}; }
  /// Nearest centroid (ties to the smaller index).
  int predict(std::span<const float> x) const;
};

/// k-means++ seeding then Lloyd iterations; the restart with lowest inertia
/// wins. Each restart stops once every centroid moves less than `tol` or the
/// assignment no longer changes. An empty cluster is re-seeded at the point
/// farthest from its own centroid.
KMeansModel kmeans_fit(const FeatureMatrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

/// Mean silhouette coefficient under Euclidean distance. Singleton clusters
/// contribute 0, as does a point with a == b == 0.
double silhouette_mean(const FeatureMatrix& x, std::span<const int> labels);

/// Per-sample silhouette values.
std::vector<double> silhouette_samples(const FeatureMatrix& x, std::span<const int> labels);

struct SilhouetteReport {
  std::map<std::size_t, double> per_k;
  std::size_t best_k = 0;

  std::string to_json() const;
};

/// Fits k-means for every k in [k_min, k_max] and scores each by silhouette.
/// best_k is the argmax, ties toward the smaller k.
SilhouetteReport k_sweep(const FeatureMatrix& x, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                         const KMeansOptions& options = {});

}  // namespace foodclf
