#include "foodclf/model_io.hpp"

#include <map>

#include "foodclf/binio.hpp"
#include "foodclf/error.hpp"
#include "json.hpp"

namespace foodclf {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kModelMagic = "FMD1";

struct Block {
  std::string name;
  bool wide = true;  // f64 when true, f32 otherwise
  std::vector<double> values;
};

class BlockSet {
 public:
  void add(std::string name, std::vector<double> values, bool wide = true) {
    blocks_.push_back({std::move(name), wide, std::move(values)});
  }
  template <typename T>
  void add_cast(std::string name, const std::vector<T>& values, bool wide = true) {
    add(std::move(name), std::vector<double>(values.begin(), values.end()), wide);
  }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::vector<Block>& blocks() { return blocks_; }

  const std::vector<double>& get(const std::string& name) const {
    for (const auto& b : blocks_) {
      if (b.name == name) return b.values;
    }
    fail(ErrorCode::ModelParse, "missing parameter block '" + name + "'");
  }

 private:
  std::vector<Block> blocks_;
};

ojson kernel_json(const KernelSpec& k) {
  return {{"kind", k.kind == KernelKind::Linear ? "linear" : "rbf"}, {"sigma", k.sigma}};
}

KernelSpec kernel_from(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "linear") return KernelSpec::linear();
  if (kind == "rbf") return KernelSpec::rbf(j.at("sigma").get<double>());
  fail(ErrorCode::ModelParse, "unknown kernel '" + kind + "'");
}

template <typename T>
std::vector<T> narrow(const std::vector<double>& v) {
  return std::vector<T>(v.begin(), v.end());
}

void encode_svm(const SvmModel& m, ojson& header, BlockSet& blocks) {
  header["hyperparameters"] = {{"C", m.params.c},
                               {"kernel", kernel_json(m.params.kernel)},
                               {"tol", m.params.tol},
                               {"max_iter", m.params.max_iter}};
  header["shapes"] = {{"dim", m.dim}, {"classes", m.num_classes}, {"pool", m.pool_size()}};
  header["seed"] = m.params.seed;
  auto machines = ojson::array();
  for (const auto& mc : m.machines) {
    machines.push_back({{"bias", mc.bias}, {"support_vectors", mc.sv.size()}, {"iterations", mc.iterations},
                        {"final_gap", mc.final_gap}});
  }
  header["machines"] = std::move(machines);
  blocks.add_cast("pool", m.pool, false);
  for (std::size_t c = 0; c < m.machines.size(); ++c) {
    const auto& mc = m.machines[c];
    const std::string p = "machine" + std::to_string(c) + ".";
    blocks.add_cast(p + "sv", mc.sv);
    blocks.add(p + "coef", mc.coef);
    blocks.add(p + "alpha", mc.alpha);
    blocks.add_cast(p + "train_index", mc.train_index);
  }
}

SvmModel decode_svm(const json& header, const BlockSet& blocks) {
  SvmModel m;
  const auto& hp = header.at("hyperparameters");
  m.params.c = hp.at("C").get<double>();
  m.params.kernel = kernel_from(hp.at("kernel"));
  m.params.tol = hp.at("tol").get<double>();
  m.params.max_iter = hp.at("max_iter").get<std::size_t>();
  m.params.seed = header.at("seed").get<std::uint64_t>();
  m.dim = header.at("shapes").at("dim").get<std::size_t>();
  m.num_classes = header.at("shapes").at("classes").get<std::size_t>();
  m.pool = narrow<float>(blocks.get("pool"));
  require(m.dim > 0 && m.pool.size() % m.dim == 0, ErrorCode::ModelParse, "support-vector pool has a ragged shape");
  const auto& machines = header.at("machines");
  require(machines.size() == m.num_classes, ErrorCode::ModelParse, "machine count differs from class count");
  for (std::size_t c = 0; c < machines.size(); ++c) {
    const std::string p = "machine" + std::to_string(c) + ".";
    BinaryMachine mc;
    mc.bias = machines[c].at("bias").get<double>();
    mc.iterations = machines[c].value("iterations", std::size_t{0});
    mc.final_gap = machines[c].value("final_gap", 0.0);
    mc.sv = narrow<std::uint32_t>(blocks.get(p + "sv"));
    mc.coef = blocks.get(p + "coef");
    mc.alpha = blocks.get(p + "alpha");
    mc.train_index = narrow<std::uint32_t>(blocks.get(p + "train_index"));
    require(mc.coef.size() == mc.sv.size() && mc.alpha.size() == mc.sv.size() &&
                mc.train_index.size() == mc.sv.size(),
            ErrorCode::ModelParse, "machine " + std::to_string(c) + " has inconsistent block lengths");
    for (auto idx : mc.sv) require(idx < m.pool_size(), ErrorCode::ModelParse, "support-vector index out of range");
    m.machines.push_back(std::move(mc));
  }
  return m;
}

void encode_gbdt(const GbdtModel& m, ojson& header, BlockSet& blocks) {
  header["hyperparameters"] = {{"rounds", m.params.rounds},     {"learning_rate", m.params.learning_rate},
                               {"max_depth", m.params.max_depth}, {"lambda", m.params.lambda},
                               {"gamma", m.params.gamma},         {"base_score", m.base_score}};
  header["shapes"] = {{"dim", m.dim}, {"classes", m.num_classes}, {"trees", m.trees.size()}};
  header["seed"] = m.params.seed;
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    std::vector<double> flat;
    flat.reserve(m.trees[t].nodes.size() * 6);
    for (const auto& n : m.trees[t].nodes) {
      flat.insert(flat.end(), {static_cast<double>(n.feature), n.threshold, static_cast<double>(n.left),
                               static_cast<double>(n.right), n.value, n.gain});
    }
    blocks.add("tree" + std::to_string(t), std::move(flat));
  }
  blocks.add("loss_trace", m.loss_trace);
}

GbdtModel decode_gbdt(const json& header, const BlockSet& blocks) {
  GbdtModel m;
  const auto& hp = header.at("hyperparameters");
  m.params.rounds = hp.at("rounds").get<std::size_t>();
  m.params.learning_rate = hp.at("learning_rate").get<double>();
  m.params.max_depth = hp.at("max_depth").get<std::size_t>();
  m.params.lambda = hp.at("lambda").get<double>();
  m.params.gamma = hp.at("gamma").get<double>();
  m.base_score = hp.at("base_score").get<double>();
  m.params.seed = header.at("seed").get<std::uint64_t>();
  m.dim = header.at("shapes").at("dim").get<std::size_t>();
  m.num_classes = header.at("shapes").at("classes").get<std::size_t>();
  const auto trees = header.at("shapes").at("trees").get<std::size_t>();
  require(m.num_classes > 0 && trees % m.num_classes == 0, ErrorCode::ModelParse, "tree count is not a multiple of K");
  for (std::size_t t = 0; t < trees; ++t) {
    const auto& flat = blocks.get("tree" + std::to_string(t));
    require(!flat.empty() && flat.size() % 6 == 0, ErrorCode::ModelParse, "tree block has a ragged shape");
    RegressionTree tree;
    const std::size_t count = flat.size() / 6;
    for (std::size_t i = 0; i < count; ++i) {
      RegressionTree::Node n;
      n.feature = static_cast<std::int32_t>(flat[i * 6]);
      n.threshold = flat[i * 6 + 1];
      n.left = static_cast<std::int32_t>(flat[i * 6 + 2]);
      n.right = static_cast<std::int32_t>(flat[i * 6 + 3]);
      n.value = flat[i * 6 + 4];
      n.gain = flat[i * 6 + 5];
      if (n.feature >= 0) {
        require(static_cast<std::size_t>(n.feature) < m.dim && n.left > static_cast<std::int32_t>(i) &&
                    n.right > static_cast<std::int32_t>(i) && static_cast<std::size_t>(n.left) < count &&
                    static_cast<std::size_t>(n.right) < count,
                ErrorCode::ModelParse, "tree " + std::to_string(t) + " has an invalid node");
      }
      tree.nodes.push_back(n);
    }
    m.trees.push_back(std::move(tree));
  }
  m.loss_trace = blocks.get("loss_trace");
  return m;
}

void encode_mlp(const MlpModel& m, ojson& header, BlockSet& blocks) {
  header["hyperparameters"] = {{"hidden", {m.params.hidden1, m.params.hidden2}},
                               {"dropout", m.params.dropout},
                               {"output", m.params.output == MlpOutput::Softmax ? "softmax" : "relu_regression"},
                               {"epochs", m.params.epochs},
                               {"batch_size", m.params.batch_size},
                               {"learning_rate", m.params.learning_rate}};
  header["shapes"] = {{"layers", m.sizes}, {"classes", m.num_classes}};
  header["seed"] = m.params.seed;
  blocks.add("parameters", m.parameters);
  blocks.add("loss_trace", m.loss_trace);
}

MlpModel decode_mlp(const json& header, const BlockSet& blocks) {
  MlpModel m;
  const auto& hp = header.at("hyperparameters");
  const auto hidden = hp.at("hidden").get<std::array<std::size_t, 2>>();
  m.params.hidden1 = hidden[0];
  m.params.hidden2 = hidden[1];
  m.params.dropout = hp.at("dropout").get<std::array<double, 2>>();
  const auto output = hp.at("output").get<std::string>();
  if (output == "softmax") {
    m.params.output = MlpOutput::Softmax;
  } else if (output == "relu_regression") {
    m.params.output = MlpOutput::ReluRegression;
  } else {
    fail(ErrorCode::ModelParse, "unknown output head '" + output + "'");
  }
  m.params.epochs = hp.at("epochs").get<std::size_t>();
  m.params.batch_size = hp.at("batch_size").get<std::size_t>();
  m.params.learning_rate = hp.at("learning_rate").get<double>();
  m.params.seed = header.at("seed").get<std::uint64_t>();
  m.sizes = header.at("shapes").at("layers").get<std::array<std::size_t, 4>>();
  m.num_classes = header.at("shapes").at("classes").get<std::size_t>();
  m.parameters = blocks.get("parameters");
  require(m.parameters.size() == MlpModel::parameter_count(m.sizes), ErrorCode::ModelParse,
          "parameter block length does not match the layer sizes");
  m.loss_trace = blocks.get("loss_trace");
  return m;
}

}  // namespace

std::string model_kind(const AnyModel& model) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SvmModel>) return "svm";
        else if constexpr (std::is_same_v<T, GbdtModel>) return "gbdt";
        else return "mlp";
      },
      model);
}

std::vector<std::uint8_t> serialize_model(const AnyModel& model) {
  ojson header;
  header["kind"] = model_kind(model);
  BlockSet blocks;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SvmModel>) encode_svm(m, header, blocks);
        else if constexpr (std::is_same_v<T, GbdtModel>) encode_gbdt(m, header, blocks);
        else encode_mlp(m, header, blocks);
      },
      model);
  auto declared = ojson::array();
  for (const auto& b : blocks.blocks()) {
    declared.push_back({{"name", b.name}, {"dtype", b.wide ? "f64" : "f32"}, {"count", b.values.size()}});
  }
  header["blocks"] = std::move(declared);
  const std::string text = header.dump();

  binio::Writer out;
  out.text(kModelMagic);
  out.u32(static_cast<std::uint32_t>(text.size()));
  out.text(text);
  for (const auto& b : blocks.blocks()) {
    for (double v : b.values) {
      if (b.wide) out.f64(v);
      else out.f32(static_cast<float>(v));
    }
  }
  return std::move(out).take();
}

AnyModel parse_model(std::span<const std::uint8_t> bytes) {
  binio::Reader in(bytes, ErrorCode::ModelParse);
  in.expect_magic(kModelMagic);
  const std::uint32_t len = in.u32();
  const std::string text = in.text(len);
  try {
    const json header = json::parse(text);
    BlockSet blocks;
    for (const auto& decl : header.at("blocks")) {
      const auto dtype = decl.at("dtype").get<std::string>();
      require(dtype == "f64" || dtype == "f32", ErrorCode::ModelParse, "unknown block dtype '" + dtype + "'");
      const bool wide = dtype == "f64";
      const auto count = decl.at("count").get<std::size_t>();
      require(count <= in.remaining() / (wide ? 8 : 4), ErrorCode::ModelParse, "parameter block truncated");
      std::vector<double> values(count);
      for (auto& v : values) v = wide ? in.f64() : static_cast<double>(in.f32());
      blocks.add(decl.at("name").get<std::string>(), std::move(values), wide);
    }
    require(in.remaining() == 0, ErrorCode::ModelParse, "trailing bytes after the last block");
    const auto kind = header.at("kind").get<std::string>();
    if (kind == "svm") return decode_svm(header, blocks);
    if (kind == "gbdt") return decode_gbdt(header, blocks);
    if (kind == "mlp") return decode_mlp(header, blocks);
    fail(ErrorCode::ModelParse, "unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    fail(ErrorCode::ModelParse, std::string("bad header: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const AnyModel& model) {
  binio::write_file(path, serialize_model(model));
}

AnyModel load_model(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path);
  try {
    return parse_model(bytes);
  } catch (const Error& e) {
    throw e.with_context(path.string());
  }
}

std::vector<int> predict(const AnyModel& model, const FeatureMatrix& x) {
  return std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SvmModel>) return svm_predict(m, x);
        else if constexpr (std::is_same_v<T, GbdtModel>) return gbdt_predict(m, x);
        else return mlp_predict(m, x);
      },
      model);
}

}  // namespace foodclf
