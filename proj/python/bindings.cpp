// Python bindings: numpy in, numpy out.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "foodclf/augment.hpp"
#include "foodclf/clusterval.hpp"
#include "foodclf/convnet.hpp"
#include "foodclf/error.hpp"
#include "foodclf/features.hpp"
#include "foodclf/image.hpp"
#include "foodclf/manifest.hpp"
#include "foodclf/model_io.hpp"
#include "foodclf/pipeline.hpp"

namespace py = pybind11;
using namespace foodclf;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using I32Array = py::array_t<int, py::array::c_style | py::array::forcecast>;

Image to_image(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("image must be an (H, W, 3) uint8 array");
  const auto h = static_cast<std::uint32_t>(a.shape(0));
  const auto w = static_cast<std::uint32_t>(a.shape(1));
  return Image(w, h, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

U8Array from_image(const Image& img) {
  U8Array out({static_cast<py::ssize_t>(img.height()), static_cast<py::ssize_t>(img.width()), py::ssize_t{3}});
  std::memcpy(out.mutable_data(), img.pixels().data(), img.pixels().size());
  return out;
}

FeatureMatrix to_features(const F32Array& x, const I32Array& y) {
  if (x.ndim() != 2) throw py::value_error("features must be a 2-D array");
  if (y.ndim() != 1 || y.shape(0) != x.shape(0)) throw py::value_error("labels must be 1-D with one entry per row");
  const auto n = static_cast<std::size_t>(x.shape(0));
  const auto d = static_cast<std::size_t>(x.shape(1));
  return FeatureMatrix(n, d, std::vector<float>(x.data(), x.data() + x.size()),
                       std::vector<int>(y.data(), y.data() + y.size()));
}

FeatureMatrix to_features(const F32Array& x) {
  if (x.ndim() != 2) throw py::value_error("features must be a 2-D array");
  const auto n = static_cast<std::size_t>(x.shape(0));
  return FeatureMatrix(n, static_cast<std::size_t>(x.shape(1)), std::vector<float>(x.data(), x.data() + x.size()),
                       std::vector<int>(n, 0));
}

F32Array values_array(const FeatureMatrix& fm) {
  F32Array out({static_cast<py::ssize_t>(fm.rows), static_cast<py::ssize_t>(fm.cols)});
  std::memcpy(out.mutable_data(), fm.values.data(), fm.values.size() * sizeof(float));
  return out;
}

template <typename T>
py::array_t<T> vector_array(const std::vector<T>& v) {
  return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

F32Array tensor_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  F32Array out(shape);
  std::memcpy(out.mutable_data(), t.values().data(), t.size() * sizeof(float));
  return out;
}

NormalizationSpec parse_norm(const std::string& mode, const WeightBundle& bundle) {
  if (mode == "bundle") return bundle.normalization;
  NormalizationSpec spec;
  if (mode == "unit") return spec;
  if (mode == "mean") {
    spec.mode = NormalizationMode::MeanSubtract;
    spec.channel_means = bundle.normalization.mode == NormalizationMode::MeanSubtract
                             ? bundle.normalization.channel_means
                             : std::array<float, 3>{0.485F, 0.456F, 0.406F};
    return spec;
  }
  throw py::value_error("normalization must be 'bundle', 'unit' or 'mean'");
}

struct PyModel {
  AnyModel model;
};

py::tuple features_tuple(const FeatureMatrix& fm) {
  return py::make_tuple(values_array(fm), vector_array(fm.labels), fm.class_names);
}

}  // namespace

PYBIND11_MODULE(_foodclf, m) {
  m.doc() = "Food image classification pipeline";

  static PyObject* error_type = PyErr_NewException("foodclf._foodclf.FoodclfError", PyExc_RuntimeError, nullptr);
  m.attr("FoodclfError") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error_type)(e.what());
      exc.attr("code") = std::string(error_code_name(e.code()));
      exc.attr("exit_code") = exit_code_for(e.code());
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  // ---- pixelio / augment ----
  m.def("read_image", [](const std::filesystem::path& p) { return from_image(read_image(p)); }, py::arg("path"),
        "Decode a PNG or JPEG file to an (H, W, 3) uint8 array.");
  m.def("write_png", [](const std::filesystem::path& p, const U8Array& img) { write_png(p, to_image(img)); },
        py::arg("path"), py::arg("image"));
  m.def("resize_bilinear",
        [](const U8Array& img, std::uint32_t w, std::uint32_t h) { return from_image(resize_bilinear(to_image(img), w, h)); },
        py::arg("image"), py::arg("width"), py::arg("height"));
  m.def(
      "augment_variants",
      [](const U8Array& img, std::uint64_t seed, double scale_fraction, double noise_fraction) {
        const auto variants =
            generate_variants(to_image(img), AugmentationPlan::standard(scale_fraction, noise_fraction), seed);
        py::list out;
        for (const Image& v : variants) out.append(from_image(v));
        return out;
      },
      py::arg("image"), py::arg("seed") = 0, py::arg("scale_fraction") = 0.10, py::arg("noise_fraction") = 0.02,
      "The 32 augmented variants of one image, identity first.");
  m.def(
      "augment_dataset",
      [](const std::filesystem::path& manifest, const std::filesystem::path& out_dir, std::uint64_t seed) {
        const AugmentSummary s = augment_dataset(load_manifest(manifest), out_dir, seed);
        py::dict d;
        d["source_images"] = s.source_images;
        d["written_images"] = s.written_images;
        d["manifest"] = s.manifest_path.string();
        return d;
      },
      py::arg("manifest"), py::arg("out_dir"), py::arg("seed") = 0);

  // ---- convnet ----
  py::class_<WeightBundle>(m, "WeightBundle")
      .def_static("load", [](const std::filesystem::path& p) { return load_weight_bundle(p); }, py::arg("path"))
      .def_static("tiny", &tiny_preset, py::arg("seed") = 0)
      .def_static("vgg16_64", &vgg16_64_preset, py::arg("seed") = 0)
      .def("save", [](const WeightBundle& b, const std::filesystem::path& p) { save_weight_bundle(p, b); }, py::arg("path"))
      .def("to_bytes", [](const WeightBundle& b) {
        const auto bytes = serialize_weight_bundle(b);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      })
      .def_static("from_bytes", [](const py::bytes& data) {
        const std::string s = data;
        return parse_weight_bundle(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
      })
      .def_property_readonly("input_shape",
                             [](const WeightBundle& b) {
                               return py::make_tuple(b.input.channels, b.input.height, b.input.width);
                             })
      .def_property_readonly("output_dim", &WeightBundle::output_dim)
      .def_property_readonly("tensor_names", [](const WeightBundle& b) { return b.tensor_order; })
      .def("tensor", [](const WeightBundle& b, const std::string& name) { return tensor_array(b.tensor(name)); })
      .def("forward",
           [](const WeightBundle& b, const F32Array& x) {
             std::vector<std::size_t> shape(x.shape(), x.shape() + x.ndim());
             return tensor_array(forward(b, Tensor(shape, std::vector<float>(x.data(), x.data() + x.size()))));
           },
           py::arg("x"), "Run a (C, H, W) float tensor through the network.")
      .def("image_features",
           [](const WeightBundle& b, const U8Array& img, const std::string& norm) {
             return tensor_array(image_features(to_image(img), b, parse_norm(norm, b)));
           },
           py::arg("image"), py::arg("normalization") = "bundle");

  m.def(
      "extract_features",
      [](const std::filesystem::path& manifest, const WeightBundle& b, const std::string& norm) {
        return features_tuple(extract_features(load_manifest(manifest), b, parse_norm(norm, b)));
      },
      py::arg("manifest"), py::arg("bundle"), py::arg("normalization") = "bundle",
      "Returns (X float32 [N, D], y int32 [N], class_names).");

  // ---- feature files ----
  m.def("load_features", [](const std::filesystem::path& p) { return features_tuple(load_features(p)); },
        py::arg("path"));
  m.def(
      "save_features",
      [](const std::filesystem::path& p, const F32Array& x, const I32Array& y, std::vector<std::string> names) {
        FeatureMatrix fm = to_features(x, y);
        fm.class_names = std::move(names);
        save_features(p, fm);
      },
      py::arg("path"), py::arg("X"), py::arg("y"), py::arg("class_names") = std::vector<std::string>{});

  // ---- clusterval ----
  m.def(
      "kmeans",
      [](const F32Array& x, std::size_t k, std::uint64_t seed) {
        const KMeansModel km = kmeans_fit(to_features(x), k, seed);
        py::array_t<double> centroids({static_cast<py::ssize_t>(km.k), static_cast<py::ssize_t>(km.dim)});
        std::memcpy(centroids.mutable_data(), km.centroids.data(), km.centroids.size() * sizeof(double));
        return py::make_tuple(vector_array(km.assignment), centroids, km.inertia);
      },
      py::arg("X"), py::arg("k"), py::arg("seed") = 0, "Returns (assignment, centroids, inertia).");
  m.def("silhouette_score", [](const F32Array& x, const I32Array& labels) {
        const FeatureMatrix fm = to_features(x, labels);
        return silhouette_mean(fm, fm.labels);
      }, py::arg("X"), py::arg("labels"));
  m.def("silhouette_samples", [](const F32Array& x, const I32Array& labels) {
        const FeatureMatrix fm = to_features(x, labels);
        return vector_array(silhouette_samples(fm, fm.labels));
      }, py::arg("X"), py::arg("labels"));
  m.def(
      "k_sweep",
      [](const F32Array& x, std::size_t k_min, std::size_t k_max, std::uint64_t seed) {
        const SilhouetteReport r = k_sweep(to_features(x), k_min, k_max, seed);
        return py::make_tuple(r.per_k, r.best_k);
      },
      py::arg("X"), py::arg("k_min") = 4, py::arg("k_max") = 12, py::arg("seed") = 0,
      "Returns ({k: silhouette}, best_k).");

  // ---- learners ----
  m.def(
      "split_indices",
      [](const I32Array& y, double test_fraction, std::uint64_t seed, bool stratified) {
        const SplitIndices s = split_indices(std::span(y.data(), static_cast<std::size_t>(y.size())),
                                             {test_fraction, seed, stratified});
        return py::make_tuple(vector_array(s.train), vector_array(s.test));
      },
      py::arg("y"), py::arg("test_fraction") = 0.2, py::arg("seed") = 0, py::arg("stratified") = true);

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("kind", [](const PyModel& h) { return model_kind(h.model); })
      .def("predict", [](const PyModel& h, const F32Array& x) { return vector_array(predict(h.model, to_features(x))); },
           py::arg("X"))
      .def("save", [](const PyModel& h, const std::filesystem::path& p) { save_model(p, h.model); }, py::arg("path"))
      .def_static("load", [](const std::filesystem::path& p) { return PyModel{load_model(p)}; }, py::arg("path"));

  m.def(
      "train_svm",
      [](const F32Array& x, const I32Array& y, double c, const std::string& kernel, std::optional<double> sigma,
         double tol, std::uint64_t seed) {
        const FeatureMatrix fm = to_features(x, y);
        SvmParams p;
        p.c = c;
        p.tol = tol;
        p.seed = seed;
        if (kernel == "linear") p.kernel = KernelSpec::linear();
        else if (kernel == "rbf") p.kernel = KernelSpec::rbf(sigma.value_or(default_rbf_sigma(fm)));
        else throw py::value_error("kernel must be 'rbf' or 'linear'");
        py::gil_scoped_release release;
        return PyModel{svm_train(fm, p)};
      },
      py::arg("X"), py::arg("y"), py::arg("C") = 1.0, py::arg("kernel") = "rbf", py::arg("sigma") = py::none(),
      py::arg("tol") = 1e-3, py::arg("seed") = 0);
  m.def(
      "train_gbdt",
      [](const F32Array& x, const I32Array& y, std::size_t rounds, double learning_rate, std::size_t max_depth,
         double lambda, double gamma, std::uint64_t seed) {
        const FeatureMatrix fm = to_features(x, y);
        GbdtParams p;
        p.rounds = rounds;
        p.learning_rate = learning_rate;
        p.max_depth = max_depth;
        p.lambda = lambda;
        p.gamma = gamma;
        p.seed = seed;
        py::gil_scoped_release release;
        return PyModel{gbdt_train(fm, p)};
      },
      py::arg("X"), py::arg("y"), py::arg("rounds") = 100, py::arg("learning_rate") = 0.1, py::arg("max_depth") = 4,
      py::arg("reg_lambda") = 1.0, py::arg("gamma") = 0.0, py::arg("seed") = 0);
  m.def(
      "train_mlp",
      [](const F32Array& x, const I32Array& y, std::pair<std::size_t, std::size_t> hidden,
         std::pair<double, double> dropout, const std::string& output, std::size_t epochs, std::size_t batch_size,
         double learning_rate, std::uint64_t seed) {
        const FeatureMatrix fm = to_features(x, y);
        MlpParams p;
        p.hidden1 = hidden.first;
        p.hidden2 = hidden.second;
        p.dropout = {dropout.first, dropout.second};
        if (output == "softmax") p.output = MlpOutput::Softmax;
        else if (output == "relu_regression") p.output = MlpOutput::ReluRegression;
        else throw py::value_error("output must be 'softmax' or 'relu_regression'");
        p.epochs = epochs;
        p.batch_size = batch_size;
        p.learning_rate = learning_rate;
        p.seed = seed;
        py::gil_scoped_release release;
        return PyModel{mlp_train(fm, p)};
      },
      py::arg("X"), py::arg("y"), py::arg("hidden") = std::pair<std::size_t, std::size_t>{512, 128},
      py::arg("dropout") = std::pair<double, double>{0.5, 0.5}, py::arg("output") = "softmax", py::arg("epochs") = 50,
      py::arg("batch_size") = 32, py::arg("learning_rate") = 0.01, py::arg("seed") = 0);

  // ---- pipeline ----
  m.def(
      "run_experiment",
      [](const std::filesystem::path& config, bool include_timing) {
        ExperimentReport r;
        {
          py::gil_scoped_release release;
          r = run_experiment(config);
        }
        return py::make_tuple(r.to_json(include_timing), r.to_table());
      },
      py::arg("config"), py::arg("include_timing") = true, "Returns (report JSON text, table text).");

  m.def("exit_code_for", [](const std::string& name) {
    for (int c = 0; c <= static_cast<int>(ErrorCode::NumericalFailure); ++c) {
      if (error_code_name(static_cast<ErrorCode>(c)) == name) return exit_code_for(static_cast<ErrorCode>(c));
    }
    throw py::value_error("unknown error code " + name);
  }, py::arg("code"));
}
