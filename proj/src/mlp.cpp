#include "foodclf/mlp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "foodclf/error.hpp"
#include "foodclf/rng.hpp"

namespace foodclf {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const Matrix>;
using Map = Eigen::Map<Matrix>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;

std::size_t output_units(std::size_t num_classes, MlpOutput output) {
  return output == MlpOutput::Softmax ? num_classes : 1;
}

struct Activations {
  Matrix z1, a1, z2, s2, a2, z3, out;
};

Matrix to_matrix(const FeatureMatrix& x) {
  Matrix m(static_cast<Eigen::Index>(x.rows), static_cast<Eigen::Index>(x.cols));
  for (std::size_t i = 0; i < x.values.size(); ++i) m.data()[i] = x.values[i];
  return m;
}

ConstMap weights(const MlpModel& m, std::size_t layer) {
  return {m.parameters.data() + m.weight_offset(layer), static_cast<Eigen::Index>(m.sizes[layer + 1]),
          static_cast<Eigen::Index>(m.sizes[layer])};
}

ConstVecMap bias(const MlpModel& m, std::size_t layer) {
  return {m.parameters.data() + m.bias_offset(layer), static_cast<Eigen::Index>(m.sizes[layer + 1])};
}

Activations run_forward(const MlpModel& m, const Matrix& x, const DropoutMasks* masks) {
  Activations a;
  a.z1 = (x * weights(m, 0).transpose()).rowwise() + bias(m, 0);
  a.a1 = a.z1.cwiseMax(0.0);
  if (masks != nullptr) a.a1 = a.a1.cwiseProduct(ConstMap(masks->first.data(), a.a1.rows(), a.a1.cols()));
  a.z2 = (a.a1 * weights(m, 1).transpose()).rowwise() + bias(m, 1);
  a.s2 = (1.0 + (-a.z2.array()).exp()).inverse().matrix();
  a.a2 = a.s2;
  if (masks != nullptr) a.a2 = a.a2.cwiseProduct(ConstMap(masks->second.data(), a.a2.rows(), a.a2.cols()));
  a.z3 = (a.a2 * weights(m, 2).transpose()).rowwise() + bias(m, 2);
  if (m.params.output == MlpOutput::Softmax) {
    a.out = a.z3;
    for (Eigen::Index i = 0; i < a.out.rows(); ++i) {
      auto row = a.out.row(i);
      row.array() -= row.maxCoeff();
      row = row.array().exp().matrix();
      row /= row.sum();
    }
  } else {
    a.out = a.z3.cwiseMax(0.0);
  }
  return a;
}

double batch_loss(const MlpModel& m, const Activations& a, std::span<const int> labels) {
  const auto n = static_cast<double>(labels.size());
  double loss = 0.0;
  if (m.params.output == MlpOutput::Softmax) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      // log softmax computed from the logits for stability
      const auto row = a.z3.row(static_cast<Eigen::Index>(i));
      const double top = row.maxCoeff();
      const double lse = top + std::log((row.array() - top).exp().sum());
      loss += lse - row(labels[i]);
    }
  } else {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double diff = a.out(static_cast<Eigen::Index>(i), 0) - labels[i];
      loss += 0.5 * diff * diff;
    }
  }
  return labels.empty() ? 0.0 : loss / n;
}

void validate_batch(const MlpModel& m, const FeatureMatrix& x, const DropoutMasks* masks) {
  require(x.cols == m.sizes[0], ErrorCode::DimensionMismatch,
          "network expects " + std::to_string(m.sizes[0]) + " features, got " + std::to_string(x.cols));
  if (masks != nullptr) {
    require(masks->first.size() == x.rows * m.sizes[1] && masks->second.size() == x.rows * m.sizes[2],
            ErrorCode::ShapeMismatch, "dropout masks do not match the batch");
  }
}

}  // namespace

std::size_t MlpModel::parameter_count(const std::array<std::size_t, 4>& s) {
  return s[1] * s[0] + s[1] + s[2] * s[1] + s[2] + s[3] * s[2] + s[3];
}

std::size_t MlpModel::weight_offset(std::size_t layer) const {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l) offset += sizes[l + 1] * sizes[l] + sizes[l + 1];
  return offset;
}

std::size_t MlpModel::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + sizes[layer + 1] * sizes[layer];
}

MlpModel mlp_init(std::size_t input_dim, std::size_t num_classes, const MlpParams& params) {
  require(input_dim >= 1 && params.hidden1 >= 1 && params.hidden2 >= 1, ErrorCode::ArchMismatch,
          "every layer needs at least one unit");
  require(num_classes >= 2, ErrorCode::ArchMismatch, "the network needs at least two classes");
  for (double p : params.dropout) {
    require(p >= 0.0 && p < 1.0, ErrorCode::ArchMismatch, "dropout rates must lie in [0, 1)");
  }
  require(params.batch_size >= 1, ErrorCode::InvalidArgument, "batch size must be >= 1");
  require(params.learning_rate > 0.0 && std::isfinite(params.learning_rate), ErrorCode::InvalidArgument,
          "learning rate must be finite and > 0");

  MlpModel m;
  m.params = params;
  m.num_classes = num_classes;
  m.sizes = {input_dim, params.hidden1, params.hidden2, output_units(num_classes, params.output)};
  m.parameters.assign(MlpModel::parameter_count(m.sizes), 0.0);

  Rng rng(params.seed);
  for (std::size_t layer = 0; layer < 3; ++layer) {
    const auto fan_in = static_cast<double>(m.sizes[layer]);
    const auto fan_out = static_cast<double>(m.sizes[layer + 1]);
    const bool he = layer == 0;
    const double stddev = he ? std::sqrt(2.0 / fan_in) : std::sqrt(2.0 / (fan_in + fan_out));
    const std::size_t begin = m.weight_offset(layer);
    const std::size_t end = m.bias_offset(layer);
    for (std::size_t i = begin; i < end; ++i) m.parameters[i] = rng.normal() * stddev;
  }
  return m;
}

DropoutMasks make_dropout_masks(const MlpModel& model, std::size_t batch_rows, std::uint64_t seed) {
  Rng rng(seed);
  DropoutMasks masks;
  auto fill = [&](std::vector<double>& mask, std::size_t units, double rate) {
    mask.resize(batch_rows * units);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& v : mask) v = rate > 0.0 && rng.uniform() < rate ? 0.0 : keep_scale;
  };
  fill(masks.first, model.sizes[1], model.params.dropout[0]);
  fill(masks.second, model.sizes[2], model.params.dropout[1]);
  return masks;
}

MlpLossGradient mlp_loss_gradient(const MlpModel& m, const FeatureMatrix& batch, const DropoutMasks* masks) {
  validate_batch(m, batch, masks);
  const Matrix x = to_matrix(batch);
  const Activations a = run_forward(m, x, masks);
  const auto rows = static_cast<Eigen::Index>(batch.rows);
  const double inv_n = batch.rows == 0 ? 0.0 : 1.0 / static_cast<double>(batch.rows);

  MlpLossGradient out;
  out.loss = batch_loss(m, a, batch.labels);
  out.gradient.assign(m.parameters.size(), 0.0);

  Matrix dz3;
  if (m.params.output == MlpOutput::Softmax) {
    dz3 = a.out;
    for (Eigen::Index i = 0; i < rows; ++i) dz3(i, batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
  } else {
    dz3 = Matrix(rows, 1);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double diff = a.out(i, 0) - batch.labels[static_cast<std::size_t>(i)];
      dz3(i, 0) = a.z3(i, 0) > 0.0 ? diff : 0.0;
    }
  }
  dz3 *= inv_n;

  auto grad_w = [&](std::size_t layer) {
    return Map(out.gradient.data() + m.weight_offset(layer), static_cast<Eigen::Index>(m.sizes[layer + 1]),
               static_cast<Eigen::Index>(m.sizes[layer]));
  };
  auto grad_b = [&](std::size_t layer) {
    return VecMap(out.gradient.data() + m.bias_offset(layer), static_cast<Eigen::Index>(m.sizes[layer + 1]));
  };

  grad_w(2) = dz3.transpose() * a.a2;
  grad_b(2) = dz3.colwise().sum();

  Matrix da2 = dz3 * weights(m, 2);
  if (masks != nullptr) da2 = da2.cwiseProduct(ConstMap(masks->second.data(), da2.rows(), da2.cols()));
  const Matrix dz2 = da2.cwiseProduct(a.s2.cwiseProduct((1.0 - a.s2.array()).matrix()));
  grad_w(1) = dz2.transpose() * a.a1;
  grad_b(1) = dz2.colwise().sum();

  Matrix da1 = dz2 * weights(m, 1);
  if (masks != nullptr) da1 = da1.cwiseProduct(ConstMap(masks->first.data(), da1.rows(), da1.cols()));
  const Matrix dz1 = da1.cwiseProduct((a.z1.array() > 0.0).cast<double>().matrix());
  grad_w(0) = dz1.transpose() * x;
  grad_b(0) = dz1.colwise().sum();
  return out;
}

double mlp_loss(const MlpModel& m, const FeatureMatrix& batch, const DropoutMasks* masks) {
  validate_batch(m, batch, masks);
  const Activations a = run_forward(m, to_matrix(batch), masks);
  return batch_loss(m, a, batch.labels);
}

MlpModel mlp_train(const FeatureMatrix& x, const MlpParams& params) {
  x.validate();
  require(x.rows >= 1, ErrorCode::TooFewSamples, "network training needs at least one sample");
  const std::size_t k = x.num_classes();
  MlpModel model = mlp_init(x.cols, k, params);

  // Initialisation consumed a stream seeded with `seed`; shuffles and masks
  // use a second stream so they do not depend on the parameter count.
  Rng rng(params.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool dropout_on = params.dropout[0] > 0.0 || params.dropout[1] > 0.0;

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < x.rows; start += params.batch_size) {
      const std::size_t stop = std::min(x.rows, start + params.batch_size);
      const FeatureMatrix batch = x.select(std::span<const std::size_t>(order).subspan(start, stop - start));
      DropoutMasks masks;
      if (dropout_on) masks = make_dropout_masks(model, batch.rows, rng.next_u64());
      const MlpLossGradient lg = mlp_loss_gradient(model, batch, dropout_on ? &masks : nullptr);
      if (!std::isfinite(lg.loss)) fail(ErrorCode::NumericalFailure, "network loss became non-finite");
      for (std::size_t p = 0; p < model.parameters.size(); ++p) {
        model.parameters[p] -= params.learning_rate * lg.gradient[p];
      }
      epoch_loss += lg.loss * static_cast<double>(batch.rows);
    }
    model.loss_trace.push_back(epoch_loss / static_cast<double>(x.rows));
  }
  return model;
}

std::vector<double> mlp_outputs(const MlpModel& model, const FeatureMatrix& x) {
  if (x.rows == 0) return {};
  validate_batch(model, x, nullptr);
  const Activations a = run_forward(model, to_matrix(x), nullptr);
  return {a.out.data(), a.out.data() + a.out.size()};
}

std::vector<int> mlp_predict(const MlpModel& model, const FeatureMatrix& x) {
  const auto out = mlp_outputs(model, x);
  const std::size_t units = model.sizes[3];
  std::vector<int> labels(x.rows, 0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    if (model.params.output == MlpOutput::Softmax) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < units; ++c) {
        if (out[i * units + c] > out[i * units + best]) best = c;
      }
      labels[i] = static_cast<int>(best);
    } else {
      const double v = std::ceil(out[i] - 0.5);  // halves go to the smaller class
      labels[i] = static_cast<int>(std::clamp(v, 0.0, static_cast<double>(model.num_classes - 1)));
    }
  }
  return labels;
}

}  // namespace foodclf
