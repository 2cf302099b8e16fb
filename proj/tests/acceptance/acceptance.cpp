// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "foodclf/augment.hpp"
#include "foodclf/clusterval.hpp"
#include "foodclf/convnet.hpp"
#include "foodclf/error.hpp"
#include "foodclf/features.hpp"
#include "foodclf/gbdt.hpp"
#include "foodclf/image.hpp"
#include "foodclf/mlp.hpp"
#include "foodclf/pipeline.hpp"
#include "foodclf/svm.hpp"
#include "foodclf/synthetic.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace foodclf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string title;
  double budget_seconds;
  std::function<Outcome()> run;
  Outcome outcome;
  double seconds = 0.0;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// ---- shared fixtures -------------------------------------------------------------

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("foodclf_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

constexpr std::uint64_t kCorpusSeed = 2024;
constexpr std::uint64_t kAugmentSeed = 7;

struct Corpus {
  DatasetManifest original;
  DatasetManifest augmented;
  AugmentSummary summary;
};

std::optional<Corpus> g_corpus;

const Corpus& corpus(const Workspace& ws) {
  if (!g_corpus) {
    Corpus c;
    c.original = write_texture_corpus(ws.dir / "corpus", {10, 30, 64, kCorpusSeed});
    c.summary = augment_dataset(c.original, ws.dir / "augmented", kAugmentSeed);
    c.augmented = load_manifest(c.summary.manifest_path);
    g_corpus = std::move(c);
  }
  return *g_corpus;
}

std::optional<ExperimentReport> g_report;
std::vector<std::pair<std::string, std::pair<double, double>>> g_gbdt_losses;

// ---- criteria ----------------------------------------------------------------------

Outcome a1(const Workspace& ws) {
  const Corpus& c = corpus(ws);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(ws.dir / "augmented")) files += entry.path().extension() == ".png";
  if (c.original.samples.size() != 300) return {false, "corpus has " + std::to_string(c.original.samples.size())};
  if (c.summary.written_images != 9600 || c.augmented.samples.size() != 9600 || files != 9600) {
    return {false, "written " + std::to_string(c.summary.written_images) + ", manifest " +
                       std::to_string(c.augmented.samples.size()) + ", files " + std::to_string(files)};
  }
  std::size_t identity_ok = 0;
  for (std::size_t j = 0; j < 300; ++j) {
    const auto& src = c.original.samples[j];
    const Image original = read_image(c.original.resolve(src));
    const fs::path stem = fs::path(src.path).stem();
    std::size_t variants = 0;
    for (int i = 0; i < 32; ++i) {
      char name[16];
      std::snprintf(name, sizeof(name), "_a%02d.png", i);
      const fs::path p = ws.dir / "augmented" / (stem.string() + name);
      if (!fs::exists(p)) return {false, "missing " + p.filename().string()};
      ++variants;
      if (i == 0 && read_image(p) == original) ++identity_ok;
    }
    if (variants != 32) return {false, "sample " + std::to_string(j) + " has " + std::to_string(variants)};
  }
  for (std::size_t t = 0; t < c.augmented.samples.size(); ++t) {
    if (c.augmented.samples[t].label != c.original.samples[t / 32].label) return {false, "label drift at " + std::to_string(t)};
  }
  if (identity_ok != 300) return {false, std::to_string(identity_ok) + "/300 variant-0 images identical"};
  return {true, "300 sources -> 9600 variants, 32 each, variant 0 identical for all 300"};
}

Outcome a2() {
  const WeightBundle bundle = vgg16_64_preset(1);
  const Image img = resize_bilinear(Image(80, 80, std::array<std::uint8_t, 3>{120, 60, 200}), 64, 64);
  std::vector<std::vector<std::size_t>> shapes;
  const Tensor out = forward_traced(bundle, image_to_tensor(img, bundle.normalization), shapes);
  std::vector<std::size_t> chain{64};
  for (std::size_t i = 0; i < bundle.layers.size(); ++i) {
    if (bundle.layers[i].kind == LayerKind::MaxPool2d) {
      const auto& s = shapes[i];
      if (s.size() != 3 || s[1] != s[2]) return {false, "non-square pooled shape"};
      chain.push_back(s[1]);
    }
  }
  const std::vector<std::size_t> want{64, 32, 16, 8, 4, 2};
  std::string chain_text;
  for (std::size_t v : chain) chain_text += (chain_text.empty() ? "" : "->") + std::to_string(v);
  if (chain != want) return {false, "spatial chain " + chain_text};
  if (out.rank() != 1 || out.size() != 2048 || bundle.output_dim() != 2048) {
    return {false, "output size " + std::to_string(out.size())};
  }
  return {true, "2048 features, spatial chain " + chain_text};
}

Outcome a3() {
  struct Case {
    std::size_t rows;
    std::size_t expected;
  };
  for (const Case c : {Case{9280, 1856}, Case{14109, 2822}}) {
    std::vector<int> labels(c.rows);
    for (std::size_t i = 0; i < c.rows; ++i) labels[i] = static_cast<int>(i % 10);
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
      const SplitIndices s = split_indices(labels, {0.2, seed, true});
      std::set<std::size_t> all(s.train.begin(), s.train.end());
      all.insert(s.test.begin(), s.test.end());
      if (s.test.size() != c.expected || all.size() != c.rows || s.train.size() + s.test.size() != c.rows) {
        return {false, std::to_string(c.rows) + " rows -> " + std::to_string(s.test.size()) + " test rows"};
      }
    }
  }
  return {true, "9280 -> 1856 and 14109 -> 2822 test rows, disjoint cover"};
}

Outcome a4() {
  const FeatureMatrix x = oracle::random_features(200, 16, 1, 404);
  double worst = 0.0;
  for (std::size_t k = 2; k <= 6; ++k) {
    const KMeansModel model = kmeans_fit(x, k, 11 + k);
    const double got = silhouette_mean(x, model.assignment);
    const double want = oracle::silhouette(x, model.assignment);
    worst = std::max(worst, std::abs(got - want));
  }
  return {worst <= 1e-9, "max |diff| " + fmt("%.3e", worst) + " (tol 1e-9)"};
}

Outcome a5() {
  const FeatureMatrix blobs = gaussian_blobs(10, 40, 8, 10.0, 1.0, 505);
  const SilhouetteReport report = k_sweep(blobs, 4, 12, 17);
  return {report.best_k == 10, "best_k " + std::to_string(report.best_k) + ", silhouette " +
                                   fmt("%.4f", report.per_k.at(report.best_k))};
}

Outcome a6() {
  std::mt19937_64 gen(606);
  std::uniform_int_distribution<int> pick(0, 1 << 20);
  std::normal_distribution<float> normal(0.0F, 1.0F);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t cin = 1 + pick(gen) % 4;
    const std::size_t cout = 1 + pick(gen) % 4;
    const std::size_t k = 1 + 2 * (pick(gen) % 3);
    const std::size_t pad = pick(gen) % (k / 2 + 1);
    const std::size_t stride = 1 + pick(gen) % 3;
    const std::size_t h = k + pick(gen) % 8;
    const std::size_t w = k + pick(gen) % 8;
    Tensor x({cin, h, w});
    Tensor wt({cout, cin, k, k});
    Tensor b({cout});
    for (float& v : x.values()) v = normal(gen);
    for (float& v : wt.values()) v = normal(gen);
    for (float& v : b.values()) v = normal(gen);
    const Tensor got = conv2d_forward(x, wt, b, stride, pad);
    std::size_t oh = 0, ow = 0;
    const auto want = oracle::conv2d(x, wt, b, stride, pad, oh, ow);
    if (got.shape() != std::vector<std::size_t>{cout, oh, ow}) return {false, "shape mismatch in trial " + std::to_string(trial)};
    for (std::size_t i = 0; i < want.size(); ++i) {
      const double rel = std::abs(got[i] - want[i]) / std::max(std::abs(want[i]), 1e-12);
      worst = std::max(worst, rel);
    }
  }
  return {worst <= 1e-5, "100 configurations, max relative error " + fmt("%.3e", worst) + " (tol 1e-5)"};
}

Outcome a7() {
  std::mt19937_64 gen(707);
  std::normal_distribution<float> normal(0.0F, 1.0F);
  double worst_kkt = 0.0, worst_sum = 0.0;
  const double cs[] = {0.1, 1.0, 10.0};
  for (int p = 0; p < 10; ++p) {
    const std::size_t n = 20 + 3 * static_cast<std::size_t>(p);
    const std::size_t d = 2 + static_cast<std::size_t>(p % 4);
    FeatureMatrix x = oracle::random_features(n, d, 2, 7000 + static_cast<std::uint64_t>(p));
    for (std::size_t i = 0; i < n; ++i) {
      // Shift the classes apart a little so both separable and overlapping cases occur.
      x.row(i)[0] += (x.labels[i] == 0 ? 1.0F : -1.0F) * static_cast<float>(p % 3);
    }
    SvmParams params;
    params.c = cs[p % 3];
    params.kernel = p % 2 == 0 ? KernelSpec::rbf(1.5) : KernelSpec::linear();
    const SvmModel model = svm_train(x, params);
    for (std::size_t m = 0; m < model.machines.size(); ++m) {
      const auto& mach = model.machines[m];
      double sum = 0.0;
      for (std::size_t s = 0; s < mach.alpha.size(); ++s) {
        if (mach.alpha[s] < 0.0 || mach.alpha[s] > params.c) return {false, "alpha outside [0, C]"};
        sum += mach.coef[s];
      }
      worst_sum = std::max(worst_sum, std::abs(sum));
      const auto y = one_vs_rest_labels(x.labels, static_cast<int>(m));
      worst_kkt = std::max(worst_kkt, oracle::kkt_violation(model, m, x, y, params.c));
    }
  }
  // XOR: four noisy corner clusters.
  FeatureMatrix xr;
  xr.cols = 2;
  for (int q = 0; q < 4; ++q) {
    for (int i = 0; i < 10; ++i) {
      const float cx = q & 1 ? 1.0F : -1.0F;
      const float cy = q & 2 ? 1.0F : -1.0F;
      xr.values.push_back(cx + 0.15F * normal(gen));
      xr.values.push_back(cy + 0.15F * normal(gen));
      xr.labels.push_back((q == 0 || q == 3) ? 0 : 1);
      ++xr.rows;
    }
  }
  xr.class_names = default_class_names(2);
  SvmParams xp;
  xp.c = 10.0;
  xp.kernel = KernelSpec::rbf(0.7);
  const double xor_acc = accuracy(svm_predict(svm_train(xr, xp), xr), xr.labels);
  const bool ok = worst_kkt <= 1e-3 && worst_sum <= 1e-8 && xor_acc == 1.0;
  return {ok, "max KKT violation " + fmt("%.2e", worst_kkt) + ", max |sum alpha y| " + fmt("%.2e", worst_sum) +
                  ", XOR train accuracy " + fmt("%.3f", xor_acc)};
}

Outcome a8() {
  std::mt19937_64 gen(808);
  std::uniform_int_distribution<int> pick(0, 1 << 20);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + pick(gen) % 5;
    const std::size_t k = 2 + pick(gen) % 3;
    const std::size_t n = 3 + pick(gen) % 6;
    MlpParams params;
    params.hidden1 = 2 + pick(gen) % 6;
    params.hidden2 = 2 + pick(gen) % 5;
    params.dropout = {0.1 * (pick(gen) % 6), 0.1 * (pick(gen) % 6)};
    params.output = trial % 2 == 0 ? MlpOutput::Softmax : MlpOutput::ReluRegression;
    params.seed = 8000 + static_cast<std::uint64_t>(trial);
    FeatureMatrix x = oracle::random_features(n, d, k, 9000 + static_cast<std::uint64_t>(trial));
    MlpModel model = mlp_init(d, k, params);
    if (params.output == MlpOutput::ReluRegression) {
      // Keep the output unit active so the check covers the whole chain.
      model.parameters[model.bias_offset(2)] = 2.0;
    }
    const DropoutMasks masks = make_dropout_masks(model, n, params.seed + 1);
    const MlpLossGradient lg = mlp_loss_gradient(model, x, &masks);
    const double step = 1e-6;
    for (std::size_t p = 0; p < model.parameters.size(); ++p) {
      MlpModel plus = model, minus = model;
      plus.parameters[p] += step;
      minus.parameters[p] -= step;
      const double numeric = (mlp_loss(plus, x, &masks) - mlp_loss(minus, x, &masks)) / (2.0 * step);
      const double analytic = lg.gradient[p];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-7});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return {worst < 1e-4, "20 configurations, max relative error " + fmt("%.3e", worst) + " (tol 1e-4)"};
}

Outcome a9() {
  std::mt19937_64 gen(909);
  std::uniform_int_distribution<int> pick(0, 1 << 20);
  std::size_t checked = 0;
  for (int inst = 0; inst < 40; ++inst) {
    const std::size_t n = 5 + pick(gen) % 16;
    const std::size_t d = 1 + pick(gen) % 4;
    const std::size_t k = 2 + pick(gen) % 2;
    FeatureMatrix x = oracle::random_features(n, d, k, 9100 + static_cast<std::uint64_t>(inst));
    // Coarse grid so duplicate values and tied gains occur.
    for (float& v : x.values) v = std::round(v * 2.0F) / 2.0F;
    GbdtParams params;
    params.rounds = 1;
    params.max_depth = 1;
    params.lambda = 0.5 * (pick(gen) % 4);
    const GbdtModel model = gbdt_train(x, params);
    const double p = 1.0 / static_cast<double>(k);
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> g(n), h(n, std::max(p * (1.0 - p), 1e-16));
      for (std::size_t i = 0; i < n; ++i) g[i] = p - (x.labels[i] == static_cast<int>(c) ? 1.0 : 0.0);
      const oracle::Split want = oracle::best_split(x, g, h, params.lambda, params.gamma);
      const auto& root = model.tree(0, c).nodes.at(0);
      const bool split = root.feature >= 0;
      if (split != want.found) return {false, "instance " + std::to_string(inst) + ": split presence differs"};
      if (split && (root.feature != want.feature || root.threshold != want.threshold ||
                    std::abs(root.gain - want.gain) > 1e-9 * std::max(1.0, std::abs(want.gain)))) {
        return {false, "instance " + std::to_string(inst) + ": split differs"};
      }
      ++checked;
    }
    GbdtParams longer;
    longer.rounds = 10;
    const GbdtModel trained = gbdt_train(x, longer);
    if (!(trained.loss_trace.back() < trained.loss_trace.front())) return {false, "loss did not fall on instance " + std::to_string(inst)};
  }
  for (const auto& [name, losses] : g_gbdt_losses) {
    if (!(losses.second < losses.first)) return {false, "loss did not fall on " + name};
  }
  return {true, std::to_string(checked) + " root splits match exhaustive search; loss falls on 40 instances and " +
                    std::to_string(g_gbdt_losses.size()) + " experiment datasets"};
}

Outcome a10(const Workspace& ws) {
  const Corpus& c = corpus(ws);
  const WeightBundle bundle = tiny_preset(3);
  FeatureMatrix original = extract_features(c.original, bundle);
  original.labels = inject_label_noise(original.labels, original.num_classes(), 0.25, 31);
  original.source = "original";
  FeatureMatrix augmented = extract_features(c.augmented, bundle);
  augmented.source = "augmented";

  ExperimentSettings settings;
  settings.split.seed = 5;
  settings.extractor = "preset:tiny:3";
  settings.normalization = "unit";
  settings.svm.seed = settings.gbdt.seed = settings.mlp.seed = 5;
  g_report = run_experiment(ExperimentData{original, augmented, std::nullopt}, settings);
  const ExperimentReport& r = *g_report;
  for (const char* v : kDatasetVariants) {
    const auto& chosen = r.cells.at(v).at("gbdt").chosen;
    g_gbdt_losses.push_back({v, {chosen.at("initial_train_loss"), chosen.at("final_train_loss")}});
  }

  bool ok = r.dataset_rows.at("mixed") == 9900;
  std::ostringstream detail;
  for (const char* cls : kClassifiers) {
    const double o = r.accuracy("original", cls);
    const double a = r.accuracy("augmented", cls);
    ok = ok && a >= o + 0.10;
    detail << cls << " " << fmt("%.2f", 100 * o) << "% -> " << fmt("%.2f", 100 * a) << "%  ";
  }
  detail << "(mixed " << fmt("%.2f", 100 * r.accuracy("mixed", "svm")) << "% svm)";
  return {ok, detail.str()};
}

}  // namespace

int main() {
  Workspace ws;
  std::vector<Criterion> criteria{
      {"A1", "augmentation arithmetic", 60, [&] { return a1(ws); }},
      {"A2", "feature dimensions", 60, a2},
      {"A3", "split dimensions", 30, a3},
      {"A4", "silhouette oracle", 30, a4},
      {"A5", "cluster recovery", 120, a5},
      {"A6", "convolution oracle", 60, a6},
      {"A7", "SMO correctness", 60, a7},
      {"A8", "MLP gradient check", 120, a8},
      {"A9", "GBDT split oracle", 60, a9},
      {"A10", "end-to-end experiment", 600, [&] { return a10(ws); }},
  };
  // A9 also checks GBDT loss on the A10 datasets, so A10 runs first.
  std::vector<std::size_t> order{0, 1, 2, 3, 4, 5, 6, 7, 9, 8};
  for (std::size_t idx : order) {
    Criterion& c = criteria[idx];
    const auto start = std::chrono::steady_clock::now();
    try {
      c.outcome = c.run();
    } catch (const std::exception& e) {
      c.outcome = {false, std::string("exception: ") + e.what()};
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.seconds > c.budget_seconds) {
      c.outcome.pass = false;
      c.outcome.detail += " [over time budget]";
    }
  }
  int failures = 0;
  for (const Criterion& c : criteria) {
    std::printf("%-4s %s  %-24s %7.1fs/%4.0fs  %s\n", c.id.c_str(), c.outcome.pass ? "PASS" : "FAIL", c.title.c_str(),
                c.seconds, c.budget_seconds, c.outcome.detail.c_str());
    failures += c.outcome.pass ? 0 : 1;
  }
  if (g_report) std::printf("\n%s", g_report->to_table().c_str());
  std::printf("\n%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
