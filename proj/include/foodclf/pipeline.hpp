#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "foodclf/features.hpp"
#include "foodclf/gbdt.hpp"
#include "foodclf/mlp.hpp"
#include "foodclf/svm.hpp"

namespace foodclf {

// ---- splitting -------------------------------------------------------------

struct SplitSpec {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded split with round(n * test_fraction) test rows. When stratified the
/// test quota is apportioned over classes by largest remainder, so every
/// class gets floor(n_c * f) or one more, and at least one row of each class
/// stays in training. Index lists are ascending.
SplitIndices split_indices(std::span<const int> labels, const SplitSpec& spec);
std::pair<FeatureMatrix, FeatureMatrix> train_test_split(const FeatureMatrix& x, const SplitSpec& spec);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Stratified k-fold: rows are shuffled within each class, laid out class by
/// class, and dealt round-robin, so fold sizes differ by at most one and the
/// first folds take the remainder.
std::vector<Fold> kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct GridSearchResult {
  double best_c = 0.0;
  std::vector<std::pair<double, double>> mean_accuracy;  // (C, mean validation accuracy)
};

/// Mean k-fold validation accuracy of an SVM for each C; best_c is the
/// argmax with ties toward the smaller C.
GridSearchResult grid_search_c(const FeatureMatrix& x, const SvmParams& base, std::span<const double> grid,
                               std::size_t folds, std::uint64_t seed);

inline constexpr std::array<double, 4> kDefaultCGrid{0.1, 1.0, 10.0, 100.0};

// ---- feature scaling ---------------------------------------------------------

/// Per-column mean and standard deviation, fitted on training rows.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const FeatureMatrix& x);
  FeatureMatrix apply(const FeatureMatrix& x) const;
};

// ---- experiment grid ---------------------------------------------------------

inline constexpr std::array<const char*, 3> kDatasetVariants{"original", "augmented", "mixed"};
inline constexpr std::array<const char*, 3> kClassifiers{"mlp", "gbdt", "svm"};

enum class FeatureScaling { None, Standardize };

struct SvmSettings {
  KernelKind kernel = KernelKind::Rbf;
  std::optional<double> sigma;  // default: gamma = 1 / (D Var(X)) on the training split
  double c = 1.0;
  bool grid_search = false;
  std::vector<double> grid{kDefaultCGrid.begin(), kDefaultCGrid.end()};
  std::size_t folds = 5;
  double tol = 1e-3;
  std::uint64_t seed = 0;
  std::size_t cache_bytes = std::size_t{256} << 20;
};

struct ExperimentSettings {
  SplitSpec split;
  FeatureScaling scaling = FeatureScaling::Standardize;
  SvmSettings svm;
  GbdtParams gbdt;
  MlpParams mlp;
  /// Provenance only: how features were produced.
  std::string normalization = "unit";
  std::string extractor;
};

struct ExperimentData {
  FeatureMatrix original;
  FeatureMatrix augmented;
  /// Filled with original + augmented rows when empty.
  std::optional<FeatureMatrix> mixed;
};

struct CellResult {
  double accuracy = 0.0;
  double seconds = 0.0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  /// Classifier choices made for this cell (C, sigma, grid scores...).
  std::map<std::string, double> chosen;
  std::vector<std::pair<double, double>> grid_scores;
};

struct ExperimentReport {
  ExperimentSettings settings;
  std::map<std::string, std::size_t> dataset_rows;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  /// cells[variant][classifier]
  std::map<std::string, std::map<std::string, CellResult>> cells;

  double accuracy(const std::string& variant, const std::string& classifier) const {
    return cells.at(variant).at(classifier).accuracy;
  }
  /// Stable key order. Wall-clock seconds appear only with `include_timing`.
  std::string to_json(bool include_timing = true) const;
  /// Table laid out like the classic result table: rows Original /
  /// Augmentation / Mixed, columns MLP / GBDT / SVM, percentages.
  std::string to_table() const;
};

ExperimentReport run_experiment(const ExperimentData& data, const ExperimentSettings& settings);

/// Experiment config JSON (see README). Relative paths resolve against the
/// config file's directory.
struct ExperimentConfig {
  ExperimentSettings settings;
  ExperimentData data;
};
ExperimentSettings parse_settings(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentReport run_experiment(const std::filesystem::path& config_path);

}  // namespace foodclf
