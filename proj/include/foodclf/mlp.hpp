#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "foodclf/features.hpp"

namespace foodclf {

/// Output head. `Softmax` is softmax + cross-entropy over K units.
/// `ReluRegression` is a single ReLU unit fit to the integer label with
/// squared error; prediction rounds it to the nearest class.
enum class MlpOutput { Softmax, ReluRegression };

struct MlpParams {
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 128;
  std::array<double, 2> dropout{0.5, 0.5};
  MlpOutput output = MlpOutput::Softmax;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

/// dense(ReLU) -> dropout -> dense(sigmoid) -> dropout -> dense(output).
/// Parameters are stored flat: for each of the three dense layers, the
/// (out x in) row-major weight matrix followed by its bias vector.
struct MlpModel {
  MlpParams params;
  std::array<std::size_t, 4> sizes{};  // D, h1, h2, out
  std::size_t num_classes = 0;
  std::vector<double> parameters;
  /// Mean training loss per epoch.
  std::vector<double> loss_trace;

  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  static std::size_t parameter_count(const std::array<std::size_t, 4>& sizes);
};

/// Randomly initialised network: He-normal for the ReLU layer, Xavier-normal
/// for the sigmoid and output layers, zero biases.
MlpModel mlp_init(std::size_t input_dim, std::size_t num_classes, const MlpParams& params);

/// Inverted-dropout multipliers (0 or 1/(1-p)) for one batch.
struct DropoutMasks {
  std::vector<double> first;   // batch x h1
  std::vector<double> second;  // batch x h2
};
DropoutMasks make_dropout_masks(const MlpModel& model, std::size_t batch_rows, std::uint64_t seed);

struct MlpLossGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as MlpModel::parameters
};

/// Mean batch loss and its analytic gradient. Without masks dropout is off.
MlpLossGradient mlp_loss_gradient(const MlpModel& model, const FeatureMatrix& batch,
                                  const DropoutMasks* masks = nullptr);
double mlp_loss(const MlpModel& model, const FeatureMatrix& batch, const DropoutMasks* masks = nullptr);

/// Mini-batch SGD with a seeded shuffle every epoch.
MlpModel mlp_train(const FeatureMatrix& x, const MlpParams& params);

/// Raw output layer (softmax probabilities or the regression value), n x out.
std::vector<double> mlp_outputs(const MlpModel& model, const FeatureMatrix& x);
std::vector<int> mlp_predict(const MlpModel& model, const FeatureMatrix& x);

}  // namespace foodclf
