#include "foodclf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "foodclf/convnet.hpp"
#include "foodclf/error.hpp"
#include "foodclf/manifest.hpp"
#include "foodclf/rng.hpp"
#include "json.hpp"

namespace foodclf {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---- splitting -------------------------------------------------------------

namespace {

std::map<int, std::vector<std::size_t>> rows_by_class(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

}  // namespace

SplitIndices split_indices(std::span<const int> labels, const SplitSpec& spec) {
  require(spec.test_fraction > 0.0 && spec.test_fraction < 1.0, ErrorCode::InvalidArgument,
          "test fraction must lie in (0, 1)");
  const std::size_t n = labels.size();
  const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.test_fraction));
  Rng rng(spec.seed);
  SplitIndices out;

  if (!spec.stratified) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    out.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target));
    out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(target), order.end());
  } else {
    auto groups = rows_by_class(labels);
    for (const auto& [label, rows] : groups) {
      require(rows.size() >= 2, ErrorCode::StratifyImpossible,
              "class " + std::to_string(label) + " has " + std::to_string(rows.size()) +
                  " sample(s); stratified splitting needs at least 2");
    }
    // Largest-remainder apportionment of the test quota.
    struct Quota {
      int label;
      std::size_t base;
      double remainder;
      std::size_t cap;
    };
    std::vector<Quota> quotas;
    std::size_t assigned = 0;
    for (const auto& [label, rows] : groups) {
      const double exact = static_cast<double>(rows.size()) * spec.test_fraction;
      const auto base = static_cast<std::size_t>(std::floor(exact));
      quotas.push_back({label, base, exact - static_cast<double>(base), rows.size() - 1});
      assigned += base;
    }
    std::vector<std::size_t> rank(quotas.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
    for (std::size_t r = 0; assigned < target && r < rank.size(); ++r) {
      Quota& q = quotas[rank[r]];
      if (q.base < q.cap) {
        ++q.base;
        ++assigned;
      }
    }
    for (const Quota& q : quotas) {
      auto rows = groups[q.label];
      rng.shuffle(std::span<std::size_t>(rows));
      out.test.insert(out.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(q.base));
      out.train.insert(out.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(q.base), rows.end());
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::pair<FeatureMatrix, FeatureMatrix> train_test_split(const FeatureMatrix& x, const SplitSpec& spec) {
  const SplitIndices idx = split_indices(x.labels, spec);
  return {x.select(idx.train), x.select(idx.test)};
}

std::vector<Fold> kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  require(k >= 2, ErrorCode::InvalidArgument, "k-fold needs k >= 2");
  require(labels.size() >= k, ErrorCode::TooFewSamples,
          std::to_string(labels.size()) + " samples cannot fill " + std::to_string(k) + " folds");
  Rng rng(seed);
  std::vector<std::size_t> layout;
  layout.reserve(labels.size());
  for (auto& [label, rows] : rows_by_class(labels)) {
    rng.shuffle(std::span<std::size_t>(rows));
    layout.insert(layout.end(), rows.begin(), rows.end());
  }
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t t = 0; t < layout.size(); ++t) members[t % k].push_back(layout[t]);

  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].validation = members[f];
    std::sort(folds[f].validation.begin(), folds[f].validation.end());
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), members[g].begin(), members[g].end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  require(predicted.size() == truth.size(), ErrorCode::LengthMismatch,
          "accuracy over " + std::to_string(predicted.size()) + " predictions and " + std::to_string(truth.size()) +
              " labels");
  require(!truth.empty(), ErrorCode::EmptyInput, "accuracy of an empty set is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

GridSearchResult grid_search_c(const FeatureMatrix& x, const SvmParams& base, std::span<const double> grid,
                               std::size_t folds, std::uint64_t seed) {
  require(!grid.empty(), ErrorCode::InvalidArgument, "C grid is empty");
  GridSearchResult result;
  if (grid.size() == 1) {
    result.best_c = grid.front();
    result.mean_accuracy.emplace_back(grid.front(), std::nan(""));
    return result;
  }
  const auto split = kfold(x.labels, folds, seed);
  std::vector<std::pair<FeatureMatrix, FeatureMatrix>> parts;
  parts.reserve(split.size());
  for (const auto& f : split) parts.emplace_back(x.select(f.train), x.select(f.validation));

  double best = -1.0;
  for (double c : grid) {
    SvmParams params = base;
    params.c = c;
    double sum = 0.0;
    for (const auto& [train, validation] : parts) {
      const SvmModel model = svm_train(train, params);
      sum += accuracy(svm_predict(model, validation), validation.labels);
    }
    const double mean = sum / static_cast<double>(parts.size());
    result.mean_accuracy.emplace_back(c, mean);
    if (mean > best) {
      best = mean;
      result.best_c = c;
    }
  }
  // Ties go to the smaller C regardless of grid order.
  for (const auto& [c, mean] : result.mean_accuracy) {
    if (mean == best && c < result.best_c) result.best_c = c;
  }
  return result;
}

// ---- scaling ------------------------------------------------------------------

Standardizer Standardizer::fit(const FeatureMatrix& x) {
  Standardizer s;
  s.mean.assign(x.cols, 0.0);
  s.scale.assign(x.cols, 1.0);
  if (x.rows == 0) return s;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) s.mean[j] += r[j];
  }
  for (double& m : s.mean) m /= static_cast<double>(x.rows);
  std::vector<double> var(x.cols, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) var[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
  }
  for (std::size_t j = 0; j < x.cols; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(x.rows));
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

FeatureMatrix Standardizer::apply(const FeatureMatrix& x) const {
  require(x.cols == mean.size(), ErrorCode::DimensionMismatch, "standardizer fitted on a different width");
  FeatureMatrix out = x;
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) r[j] = static_cast<float>((r[j] - mean[j]) / scale[j]);
  }
  return out;
}

// ---- experiment ----------------------------------------------------------------

namespace {

CellResult run_cell(const std::string& classifier, const FeatureMatrix& train, const FeatureMatrix& test,
                    const ExperimentSettings& settings) {
  CellResult cell;
  cell.train_rows = train.rows;
  cell.test_rows = test.rows;
  const auto start = std::chrono::steady_clock::now();
  std::vector<int> predicted;

  if (classifier == "svm") {
    const SvmSettings& s = settings.svm;
    SvmParams params;
    params.tol = s.tol;
    params.seed = s.seed;
    params.cache_bytes = s.cache_bytes;
    if (s.kernel == KernelKind::Linear) {
      params.kernel = KernelSpec::linear();
    } else {
      params.kernel = KernelSpec::rbf(s.sigma.value_or(default_rbf_sigma(train)));
      cell.chosen["sigma"] = params.kernel.sigma;
    }
    params.c = s.c;
    if (s.grid_search) {
      const GridSearchResult gs = grid_search_c(train, params, s.grid, s.folds, s.seed);
      params.c = gs.best_c;
      cell.grid_scores = gs.mean_accuracy;
    }
    cell.chosen["C"] = params.c;
    predicted = svm_predict(svm_train(train, params), test);
  } else if (classifier == "gbdt") {
    const GbdtModel model = gbdt_train(train, settings.gbdt);
    cell.chosen["final_train_loss"] = model.loss_trace.back();
    cell.chosen["initial_train_loss"] = model.loss_trace.front();
    predicted = gbdt_predict(model, test);
  } else {
    const MlpModel model = mlp_train(train, settings.mlp);
    if (!model.loss_trace.empty()) cell.chosen["final_train_loss"] = model.loss_trace.back();
    predicted = mlp_predict(model, test);
  }
  cell.accuracy = accuracy(predicted, test.labels);
  cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cell;
}

std::string kernel_name(KernelKind k) { return k == KernelKind::Linear ? "linear" : "rbf"; }

}  // namespace

ExperimentReport run_experiment(const ExperimentData& data, const ExperimentSettings& settings) {
  std::map<std::string, FeatureMatrix> sets;
  sets["original"] = data.original;
  sets["augmented"] = data.augmented;
  sets["mixed"] = data.mixed ? *data.mixed : concat_rows(data.original, data.augmented);

  ExperimentReport report;
  report.settings = settings;
  report.feature_dim = data.original.cols;
  for (const char* variant : kDatasetVariants) {
    const FeatureMatrix& fm = sets.at(variant);
    fm.validate();
    require(fm.cols == report.feature_dim, ErrorCode::DimensionMismatch,
            std::string(variant) + " features have " + std::to_string(fm.cols) + " columns, expected " +
                std::to_string(report.feature_dim));
    report.dataset_rows[variant] = fm.rows;
    report.num_classes = std::max(report.num_classes, fm.num_classes());
  }

  for (const char* variant : kDatasetVariants) {
    const FeatureMatrix& fm = sets.at(variant);
    FeatureMatrix train;
    FeatureMatrix test;
    try {
      std::tie(train, test) = train_test_split(fm, settings.split);
      if (settings.scaling == FeatureScaling::Standardize) {
        const Standardizer s = Standardizer::fit(train);
        train = s.apply(train);
        test = s.apply(test);
      }
    } catch (const Error& e) {
      throw e.with_context(std::string("dataset ") + variant);
    }
    for (const char* classifier : kClassifiers) {
      try {
        report.cells[variant][classifier] = run_cell(classifier, train, test, settings);
      } catch (const Error& e) {
        throw e.with_context(std::string("cell (") + variant + ", " + classifier + ")");
      }
    }
  }
  return report;
}

std::string ExperimentReport::to_json(bool include_timing) const {
  ojson doc;
  ojson grid;
  for (const char* variant : kDatasetVariants) {
    ojson row;
    for (const char* classifier : kClassifiers) row[classifier] = cells.at(variant).at(classifier).accuracy;
    grid[variant] = std::move(row);
  }
  doc["grid"] = std::move(grid);

  ojson meta;
  ojson sizes;
  for (const char* variant : kDatasetVariants) {
    const CellResult& any = cells.at(variant).at("svm");
    sizes[variant] = {{"rows", dataset_rows.at(variant)}, {"train", any.train_rows}, {"test", any.test_rows}};
  }
  meta["datasets"] = std::move(sizes);
  meta["feature_dim"] = feature_dim;
  meta["num_classes"] = num_classes;
  meta["extractor"] = settings.extractor;
  meta["normalization"] = settings.normalization;
  meta["feature_scaling"] = settings.scaling == FeatureScaling::Standardize ? "standardize" : "none";
  meta["split"] = {{"test_fraction", settings.split.test_fraction},
                   {"seed", settings.split.seed},
                   {"stratified", settings.split.stratified}};
  const SvmSettings& s = settings.svm;
  ojson svm;
  svm["kernel"] = kernel_name(s.kernel);
  svm["sigma"] = s.sigma ? ojson(*s.sigma) : ojson("scale");
  svm["C"] = s.c;
  svm["grid_search"] = s.grid_search;
  svm["grid"] = s.grid;
  svm["folds"] = s.folds;
  svm["tol"] = s.tol;
  svm["seed"] = s.seed;
  meta["svm"] = std::move(svm);
  const GbdtParams& g = settings.gbdt;
  meta["gbdt"] = {{"rounds", g.rounds},     {"learning_rate", g.learning_rate}, {"max_depth", g.max_depth},
                  {"lambda", g.lambda},     {"gamma", g.gamma},                 {"seed", g.seed},
                  {"objective", "softmax"}};
  const MlpParams& m = settings.mlp;
  meta["mlp"] = {{"hidden", {m.hidden1, m.hidden2}},
                 {"dropout", m.dropout},
                 {"activations", {"relu", "sigmoid", m.output == MlpOutput::Softmax ? "softmax" : "relu"}},
                 {"output", m.output == MlpOutput::Softmax ? "softmax" : "relu_regression"},
                 {"epochs", m.epochs},
                 {"batch_size", m.batch_size},
                 {"learning_rate", m.learning_rate},
                 {"init", "he(relu) / xavier(sigmoid, output)"},
                 {"dropout_kind", "inverted"},
                 {"seed", m.seed}};
  ojson chosen;
  for (const char* variant : kDatasetVariants) {
    ojson row;
    for (const char* classifier : kClassifiers) {
      const CellResult& cell = cells.at(variant).at(classifier);
      ojson c = ojson::object();
      for (const auto& [key, value] : cell.chosen) c[key] = value;
      if (!cell.grid_scores.empty()) {
        ojson scores = ojson::array();
        for (const auto& [cv, acc] : cell.grid_scores) scores.push_back({{"C", cv}, {"cv_accuracy", acc}});
        c["grid_scores"] = std::move(scores);
      }
      row[classifier] = std::move(c);
    }
    chosen[variant] = std::move(row);
  }
  meta["cell_choices"] = std::move(chosen);
  doc["metadata"] = std::move(meta);

  if (include_timing) {
    ojson timing;
    for (const char* variant : kDatasetVariants) {
      ojson row;
      for (const char* classifier : kClassifiers) row[classifier] = cells.at(variant).at(classifier).seconds;
      timing[variant] = std::move(row);
    }
    doc["wall_clock_seconds"] = std::move(timing);
  }
  return doc.dump(2) + "\n";
}

std::string ExperimentReport::to_table() const {
  static constexpr std::array<const char*, 3> kRowNames{"Original", "Augmentation", "Mixed"};
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-14s %10s %10s %10s\n", "Category", "MLP", "GBDT", "SVM");
  out << line;
  for (std::size_t r = 0; r < kDatasetVariants.size(); ++r) {
    const auto& row = cells.at(kDatasetVariants[r]);
    std::snprintf(line, sizeof(line), "%-14s %9.2f%% %9.2f%% %9.2f%%\n", kRowNames[r], 100.0 * row.at("mlp").accuracy,
                  100.0 * row.at("gbdt").accuracy, 100.0 * row.at("svm").accuracy);
    out << line;
  }
  return out.str();
}

// ---- config -----------------------------------------------------------------------

ExperimentSettings parse_settings(const std::string& json_text) {
  ExperimentSettings s;
  try {
    const json doc = json::parse(json_text);
    if (doc.contains("split")) {
      const auto& sp = doc.at("split");
      s.split.test_fraction = sp.value("test_fraction", s.split.test_fraction);
      s.split.seed = sp.value("seed", s.split.seed);
      s.split.stratified = sp.value("stratified", s.split.stratified);
    }
    if (doc.contains("feature_scaling")) {
      const auto mode = doc.at("feature_scaling").get<std::string>();
      if (mode == "standardize") s.scaling = FeatureScaling::Standardize;
      else if (mode == "none") s.scaling = FeatureScaling::None;
      else fail(ErrorCode::ConfigInvalid, "feature_scaling must be 'standardize' or 'none'");
    }
    if (doc.contains("svm")) {
      const auto& j = doc.at("svm");
      const auto kernel = j.value("kernel", std::string("rbf"));
      if (kernel == "rbf") s.svm.kernel = KernelKind::Rbf;
      else if (kernel == "linear") s.svm.kernel = KernelKind::Linear;
      else fail(ErrorCode::ConfigInvalid, "svm.kernel must be 'rbf' or 'linear'");
      if (j.contains("sigma") && !j.at("sigma").is_null()) s.svm.sigma = j.at("sigma").get<double>();
      s.svm.c = j.value("C", s.svm.c);
      s.svm.grid_search = j.value("grid_search", s.svm.grid_search);
      if (j.contains("grid")) s.svm.grid = j.at("grid").get<std::vector<double>>();
      s.svm.folds = j.value("folds", s.svm.folds);
      s.svm.tol = j.value("tol", s.svm.tol);
      s.svm.seed = j.value("seed", s.svm.seed);
      if (j.contains("cache_mb")) s.svm.cache_bytes = j.at("cache_mb").get<std::size_t>() << 20;
    }
    if (doc.contains("gbdt")) {
      const auto& j = doc.at("gbdt");
      s.gbdt.rounds = j.value("rounds", s.gbdt.rounds);
      s.gbdt.learning_rate = j.value("learning_rate", s.gbdt.learning_rate);
      s.gbdt.max_depth = j.value("max_depth", s.gbdt.max_depth);
      s.gbdt.lambda = j.value("lambda", s.gbdt.lambda);
      s.gbdt.gamma = j.value("gamma", s.gbdt.gamma);
      s.gbdt.seed = j.value("seed", s.gbdt.seed);
    }
    if (doc.contains("mlp")) {
      const auto& j = doc.at("mlp");
      if (j.contains("hidden")) {
        const auto hidden = j.at("hidden").get<std::vector<std::size_t>>();
        require(hidden.size() == 2, ErrorCode::ConfigInvalid, "mlp.hidden must list exactly two layer sizes");
        s.mlp.hidden1 = hidden[0];
        s.mlp.hidden2 = hidden[1];
      }
      if (j.contains("dropout")) s.mlp.dropout = j.at("dropout").get<std::array<double, 2>>();
      const auto output = j.value("output", std::string("softmax"));
      if (output == "softmax") s.mlp.output = MlpOutput::Softmax;
      else if (output == "relu_regression") s.mlp.output = MlpOutput::ReluRegression;
      else fail(ErrorCode::ConfigInvalid, "mlp.output must be 'softmax' or 'relu_regression'");
      s.mlp.epochs = j.value("epochs", s.mlp.epochs);
      s.mlp.batch_size = j.value("batch_size", s.mlp.batch_size);
      s.mlp.learning_rate = j.value("learning_rate", s.mlp.learning_rate);
      s.mlp.seed = j.value("seed", s.mlp.seed);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigInvalid, e.what());
  }
  return s;
}

namespace {

struct Extractor {
  std::optional<WeightBundle> bundle;
  NormalizationSpec norm;
  std::string description;
  std::string norm_name = "unit";
};

// ImageNet channel means, used when mean subtraction is requested for a
// bundle that does not carry its own.
constexpr std::array<float, 3> kImagenetMeans{0.485F, 0.456F, 0.406F};

Extractor make_extractor(const json& doc, const std::filesystem::path& base) {
  Extractor ex;
  if (!doc.contains("extractor")) return ex;
  const auto& j = doc.at("extractor");
  if (j.contains("weights")) {
    const auto path = base / j.at("weights").get<std::string>();
    ex.bundle = load_weight_bundle(path);
    ex.description = "weights:" + path.string();
  } else {
    const auto preset = j.value("preset", std::string("tiny"));
    const auto seed = j.value("seed", std::uint64_t{0});
    if (preset == "tiny") ex.bundle = tiny_preset(seed);
    else if (preset == "vgg16-64") ex.bundle = vgg16_64_preset(seed);
    else fail(ErrorCode::ConfigInvalid, "unknown extractor preset '" + preset + "'");
    ex.description = "preset:" + preset + ":" + std::to_string(seed);
  }
  ex.norm = ex.bundle->normalization;
  const auto norm = j.value("normalization", std::string("bundle"));
  if (norm == "unit") {
    ex.norm.mode = NormalizationMode::Unit;
  } else if (norm == "mean") {
    if (ex.norm.mode != NormalizationMode::MeanSubtract) ex.norm.channel_means = kImagenetMeans;
    ex.norm.mode = NormalizationMode::MeanSubtract;
  } else if (norm != "bundle") {
    fail(ErrorCode::ConfigInvalid, "extractor.normalization must be 'bundle', 'unit' or 'mean'");
  }
  ex.norm_name = ex.norm.mode == NormalizationMode::Unit ? "unit" : "mean_subtract";
  return ex;
}

FeatureMatrix load_dataset(const json& entry, const std::filesystem::path& base, const Extractor& ex,
                           const std::string& name) {
  if (entry.contains("features")) return load_features(base / entry.at("features").get<std::string>());
  if (entry.contains("manifest")) {
    require(ex.bundle.has_value(), ErrorCode::ConfigInvalid,
            "dataset '" + name + "' names a manifest but the config has no extractor");
    FeatureMatrix fm = extract_features(load_manifest(base / entry.at("manifest").get<std::string>()), *ex.bundle, ex.norm);
    fm.source = name;
    return fm;
  }
  fail(ErrorCode::ConfigInvalid, "dataset '" + name + "' needs a 'features' or 'manifest' entry");
}

}  // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  ExperimentConfig config;
  config.settings = parse_settings(text);
  const auto base = path.parent_path();
  try {
    const json doc = json::parse(text);
    const Extractor ex = make_extractor(doc, base);
    config.settings.extractor = ex.description.empty() ? "precomputed" : ex.description;
    config.settings.normalization = ex.bundle ? ex.norm_name : "precomputed";
    require(doc.contains("original") && doc.contains("augmented"), ErrorCode::ConfigInvalid,
            "config must name 'original' and 'augmented' datasets");
    config.data.original = load_dataset(doc.at("original"), base, ex, "original");
    config.data.augmented = load_dataset(doc.at("augmented"), base, ex, "augmented");
    if (doc.contains("mixed")) config.data.mixed = load_dataset(doc.at("mixed"), base, ex, "mixed");
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigInvalid, e.what());
  }
  return config;
}

ExperimentReport run_experiment(const std::filesystem::path& config_path) {
  const ExperimentConfig config = load_experiment_config(config_path);
  return run_experiment(config.data, config.settings);
}

}  // namespace foodclf
