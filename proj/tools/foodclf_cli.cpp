// foodclf command-line tool.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "foodclf/augment.hpp"
#include "foodclf/clusterval.hpp"
#include "foodclf/convnet.hpp"
#include "foodclf/error.hpp"
#include "foodclf/features.hpp"
#include "foodclf/manifest.hpp"
#include "foodclf/model_io.hpp"
#include "foodclf/pipeline.hpp"
#include "foodclf/synthetic.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace foodclf;
using ojson = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

// ---- ingest ---------------------------------------------------------------------

struct IngestArgs {
  std::string manifest, out, weights, preset, norm;
  std::uint64_t preset_seed = 0;
};

int run_ingest(const IngestArgs& a) {
  require(a.weights.empty() != a.preset.empty(), ErrorCode::ConfigInvalid, "pass exactly one of --weights or --preset");
  WeightBundle bundle;
  if (!a.weights.empty()) bundle = load_weight_bundle(a.weights);
  else if (a.preset == "tiny") bundle = tiny_preset(a.preset_seed);
  else bundle = vgg16_64_preset(a.preset_seed);

  NormalizationSpec norm = bundle.normalization;
  if (a.norm == "unit") {
    norm.mode = NormalizationMode::Unit;
  } else if (a.norm == "mean") {
    if (norm.mode != NormalizationMode::MeanSubtract) norm.channel_means = {0.485F, 0.456F, 0.406F};
    norm.mode = NormalizationMode::MeanSubtract;
  }
  const DatasetManifest manifest = load_manifest(a.manifest);
  FeatureMatrix fm = extract_features(manifest, bundle, norm);
  fm.source = fs::path(a.manifest).filename().string();
  save_features(a.out, fm);
  std::printf("wrote %zu x %zu features to %s\n", fm.rows, fm.cols, a.out.c_str());
  return 0;
}

// ---- augment ---------------------------------------------------------------------

int run_augment(const std::string& manifest_path, const std::string& out, std::uint64_t seed) {
  const AugmentSummary s = augment_dataset(load_manifest(manifest_path), out, seed);
  std::printf("wrote %zu images from %zu sources; manifest %s\n", s.written_images, s.source_images,
              s.manifest_path.string().c_str());
  return 0;
}

// ---- cluster-sweep ---------------------------------------------------------------

int run_cluster_sweep(const std::string& features, std::size_t kmin, std::size_t kmax, std::uint64_t seed,
                      const std::string& out) {
  const SilhouetteReport r = k_sweep(load_features(features), kmin, kmax, seed);
  const std::string text = r.to_json();
  if (out.empty()) std::fputs(text.c_str(), stdout);
  else write_text(out, text);
  std::fprintf(stderr, "best k = %zu\n", r.best_k);
  return 0;
}

// ---- train / evaluate ---------------------------------------------------------------

struct TrainArgs {
  std::string features, model, out;
  double split = 0.2;
  std::uint64_t seed = 0;
  // svm
  std::string kernel = "rbf";
  std::optional<double> sigma;
  double c = 1.0;
  bool grid_search = false;
  std::size_t folds = 5;
  double tol = 1e-3;
  // gbdt
  GbdtParams gbdt;
  // mlp
  std::vector<std::size_t> hidden{512, 128};
  std::vector<double> dropout{0.5, 0.5};
  std::string output = "softmax";
  MlpParams mlp;
};

FeatureMatrix training_rows(const FeatureMatrix& all, double split, std::uint64_t seed) {
  if (split == 0.0) return all;
  return train_test_split(all, {split, seed, true}).first;
}

int run_train(TrainArgs a) {
  const FeatureMatrix all = load_features(a.features);
  all.validate();
  const FeatureMatrix train = training_rows(all, a.split, a.seed);
  AnyModel model;
  if (a.model == "svm") {
    SvmParams p;
    p.kernel = a.kernel == "linear" ? KernelSpec::linear() : KernelSpec::rbf(a.sigma.value_or(default_rbf_sigma(train)));
    p.c = a.c;
    p.tol = a.tol;
    p.seed = a.seed;
    if (a.grid_search) {
      const GridSearchResult gs = grid_search_c(train, p, kDefaultCGrid, a.folds, a.seed);
      for (const auto& [c, acc] : gs.mean_accuracy) std::fprintf(stderr, "C=%g cv accuracy %.4f\n", c, acc);
      p.c = gs.best_c;
    }
    model = svm_train(train, p);
  } else if (a.model == "gbdt") {
    a.gbdt.seed = a.seed;
    model = gbdt_train(train, a.gbdt);
  } else {
    require(a.hidden.size() == 2 && a.dropout.size() == 2, ErrorCode::ConfigInvalid,
            "--hidden and --dropout take exactly two values");
    a.mlp.hidden1 = a.hidden[0];
    a.mlp.hidden2 = a.hidden[1];
    a.mlp.dropout = {a.dropout[0], a.dropout[1]};
    a.mlp.output = a.output == "softmax" ? MlpOutput::Softmax : MlpOutput::ReluRegression;
    a.mlp.seed = a.seed;
    model = mlp_train(train, a.mlp);
  }
  save_model(a.out, model);
  std::printf("trained %s on %zu rows; wrote %s\n", model_kind(model).c_str(), train.rows, a.out.c_str());
  return 0;
}

int run_evaluate(const std::string& features, const std::string& model_path, double split, std::uint64_t seed,
                 const std::string& out) {
  const FeatureMatrix all = load_features(features);
  all.validate();
  const FeatureMatrix test = split == 0.0 ? all : train_test_split(all, {split, seed, true}).second;
  const AnyModel model = load_model(model_path);
  const double acc = accuracy(predict(model, test), test.labels);
  ojson doc;
  doc["model"] = model_kind(model);
  doc["accuracy"] = acc;
  doc["test_rows"] = test.rows;
  doc["split"] = split;
  doc["seed"] = seed;
  const std::string text = doc.dump(2) + "\n";
  if (out.empty()) std::fputs(text.c_str(), stdout);
  else write_text(out, text);
  return 0;
}

// ---- experiment -----------------------------------------------------------------------

int run_experiment_cmd(const std::string& config, const std::string& out, bool timing, bool table) {
  const ExperimentReport r = run_experiment(fs::path(config));
  write_text(out, r.to_json(timing));
  if (table) std::fputs(r.to_table().c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Food image classification pipeline"};
  app.require_subcommand(1);
  int status = 0;

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Extract convolutional features for a manifest");
  ingest_cmd->add_option("--manifest", ingest.manifest, "Dataset manifest JSON")->required();
  ingest_cmd->add_option("--out", ingest.out, "Output FMX1 file")->required();
  ingest_cmd->add_option("--weights", ingest.weights, "FWB1 weight bundle");
  ingest_cmd->add_option("--preset", ingest.preset, "Built-in random-weight network")
      ->check(CLI::IsMember({"tiny", "vgg16-64"}));
  ingest_cmd->add_option("--preset-seed", ingest.preset_seed, "Seed for --preset weights");
  ingest_cmd->add_option("--norm", ingest.norm, "Input normalization (default: the bundle's)")
      ->check(CLI::IsMember({"unit", "mean"}));
  ingest_cmd->callback([&] { status = run_ingest(ingest); });

  std::string aug_manifest, aug_out;
  std::uint64_t aug_seed = 0;
  auto* augment_cmd = app.add_subcommand("augment", "Write 32 augmented variants per image");
  augment_cmd->add_option("--manifest", aug_manifest)->required();
  augment_cmd->add_option("--out", aug_out)->required();
  augment_cmd->add_option("--seed", aug_seed);
  augment_cmd->callback([&] { status = run_augment(aug_manifest, aug_out, aug_seed); });

  std::string sweep_features, sweep_out;
  std::size_t kmin = 4, kmax = 12;
  std::uint64_t sweep_seed = 0;
  auto* sweep_cmd = app.add_subcommand("cluster-sweep", "Silhouette scores of k-means over a k range");
  sweep_cmd->add_option("--features", sweep_features)->required();
  sweep_cmd->add_option("--kmin", kmin);
  sweep_cmd->add_option("--kmax", kmax);
  sweep_cmd->add_option("--seed", sweep_seed);
  sweep_cmd->add_option("--out", sweep_out, "Report JSON (stdout when omitted)");
  sweep_cmd->callback([&] { status = run_cluster_sweep(sweep_features, kmin, kmax, sweep_seed, sweep_out); });

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one classifier and save it");
  train_cmd->add_option("--features", train.features)->required();
  train_cmd->add_option("--model", train.model)->required()->check(CLI::IsMember({"svm", "gbdt", "mlp"}));
  train_cmd->add_option("--out", train.out)->required();
  train_cmd->add_option("--split", train.split, "Hold out this test fraction (0 trains on every row)")
      ->check(CLI::Range(0.0, 0.99));
  train_cmd->add_option("--seed", train.seed);
  train_cmd->add_option("--kernel", train.kernel)->check(CLI::IsMember({"rbf", "linear"}));
  train_cmd->add_option("--sigma", train.sigma, "RBF width (default: scale rule)");
  train_cmd->add_option("-C,--C", train.c);
  train_cmd->add_flag("--grid-search", train.grid_search, "Pick C from {0.1, 1, 10, 100} by k-fold CV");
  train_cmd->add_option("--folds", train.folds);
  train_cmd->add_option("--tol", train.tol);
  train_cmd->add_option("--rounds", train.gbdt.rounds);
  train_cmd->add_option("--eta", train.gbdt.learning_rate);
  train_cmd->add_option("--max-depth", train.gbdt.max_depth);
  train_cmd->add_option("--lambda", train.gbdt.lambda);
  train_cmd->add_option("--gamma", train.gbdt.gamma);
  train_cmd->add_option("--hidden", train.hidden)->delimiter(',');
  train_cmd->add_option("--dropout", train.dropout)->delimiter(',');
  train_cmd->add_option("--output", train.output)->check(CLI::IsMember({"softmax", "relu_regression"}));
  train_cmd->add_option("--epochs", train.mlp.epochs);
  train_cmd->add_option("--batch", train.mlp.batch_size);
  train_cmd->add_option("--lr", train.mlp.learning_rate);
  train_cmd->callback([&] { status = run_train(train); });

  std::string eval_features, eval_model, eval_out;
  double eval_split = 0.2;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy of a saved model on the held-out split");
  eval_cmd->add_option("--features", eval_features)->required();
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--split", eval_split)->check(CLI::Range(0.0, 0.99));
  eval_cmd->add_option("--seed", eval_seed);
  eval_cmd->add_option("--out", eval_out);
  eval_cmd->callback([&] { status = run_evaluate(eval_features, eval_model, eval_split, eval_seed, eval_out); });

  std::string exp_config, exp_out;
  bool no_timing = false, table = false;
  auto* exp_cmd = app.add_subcommand("experiment", "Run the dataset x classifier grid");
  exp_cmd->add_option("--config", exp_config)->required();
  exp_cmd->add_option("--out", exp_out)->required();
  exp_cmd->add_flag("--no-timing", no_timing, "Leave wall-clock seconds out of the report");
  exp_cmd->add_flag("--table", table, "Print the accuracy table");
  exp_cmd->callback([&] { status = run_experiment_cmd(exp_config, exp_out, !no_timing, table); });

  std::string preset_name = "vgg16-64", preset_out;
  std::uint64_t preset_seed = 0;
  auto* preset_cmd = app.add_subcommand("preset", "Write a built-in random-weight network as FWB1");
  preset_cmd->add_option("--name", preset_name)->check(CLI::IsMember({"tiny", "vgg16-64"}));
  preset_cmd->add_option("--seed", preset_seed);
  preset_cmd->add_option("--out", preset_out)->required();
  preset_cmd->callback([&] {
    save_weight_bundle(preset_out, preset_name == "tiny" ? tiny_preset(preset_seed) : vgg16_64_preset(preset_seed));
  });

  TextureCorpusSpec synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a procedural texture corpus and manifest");
  synth_cmd->add_option("--out", synth_out)->required();
  synth_cmd->add_option("--classes", synth.classes);
  synth_cmd->add_option("--per-class", synth.per_class);
  synth_cmd->add_option("--size", synth.size);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->callback([&] {
    const DatasetManifest m = write_texture_corpus(synth_out, synth);
    std::printf("wrote %zu images to %s\n", m.samples.size(), synth_out.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return status;
}
