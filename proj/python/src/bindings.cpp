#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "nmf/checkpoint.hpp"
#include "nmf/config.hpp"
#include "nmf/errors.hpp"
#include "nmf/harness.hpp"
#include "nmf/synthdata.hpp"
#include "nmf/tape.hpp"

namespace py = pybind11;
using namespace nmf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("features must be a 2-d array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Tensor::matrix(rows, cols, std::vector<double>(a.data(), a.data() + a.size()));
}

struct PySample {
  std::vector<int> labels;
  Array features;
};

PySample wrap(const Sample& s) { return {s.labels, to_array(s.features)}; }

Sample unwrap(const PySample& s) { return Sample{s.labels, to_tensor(s.features)}; }

std::vector<Sample> unwrap_all(const std::vector<PySample>& samples) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(unwrap(s));
  return out;
}

RunConfig config_from(const std::string& json_text) {
  if (json_text.empty()) return default_run_config();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(doc);
}

py::list rows_to_list(const EvalReport& report) {
  py::list rows;
  for (const auto& r : report.rows) {
    py::dict d;
    d["variant"] = r.variant;
    d["seed"] = r.seed;
    d["observed_frac"] = r.observed_frac;
    d["predicted_frac"] = r.predicted_frac;
    d["accuracy"] = r.accuracy;
    d["class_mean_accuracy"] = r.class_mean_accuracy;
    d["num_sequences"] = r.num_sequences;
    rows.append(d);
  }
  return rows;
}

class Forecaster {
 public:
  Forecaster(const std::string& variant, std::size_t num_classes, std::size_t feature_dim, const std::string& config,
             std::uint64_t seed)
      : run_(config_from(config)), variant_(parse_variant(variant)) {
    run_.model.num_classes = num_classes;
    run_.model.feature_dim = feature_dim;
    params_ = build_ablation(variant_, run_.model, seed);
  }

  std::vector<double> fit(const std::vector<PySample>& data, std::uint64_t seed) {
    const std::vector<Sample> samples = unwrap_all(data);
    TrainConfig config = run_.train;
    config.seed = seed;
    py::gil_scoped_release release;
    return train(params_, samples, config).epoch_losses;
  }

  py::list evaluate(const std::vector<PySample>& data, std::vector<double> observed, std::vector<double> predicted,
                    double corruption, std::uint64_t seed) const {
    const std::vector<Sample> samples = unwrap_all(data);
    EvalOptions options{to_string(variant_), seed, corruption, seed, 0};
    EvalReport report;
    {
      py::gil_scoped_release release;
      report = nmf::evaluate(params_, samples, EvalProtocol{std::move(observed), std::move(predicted)}, options);
    }
    return rows_to_list(report);
  }

  std::vector<int> predict(const Array& features, const std::vector<int>& labels, std::size_t horizon) const {
    NoTapeScope no_tape;
    if (labels.empty()) throw ContractError("predict: at least one observed frame is required");
    ForecasterState state = observe(params_, to_tensor(features), one_hot(labels, run_.model.num_classes),
                                    initial_state(params_));
    const Rollout r = rollout(params_, std::move(state), labels.back(), horizon, RolloutPolicy{});
    return std::vector<int>(r.classes.begin(), r.classes.end());
  }

  void save(const std::filesystem::path& path) const { save_checkpoint(path, params_); }
  void load(const std::filesystem::path& path) { params_ = load_checkpoint(path, variant_, run_.model); }

  std::size_t parameter_count() const { return params_.parameter_count(); }
  std::string variant() const { return to_string(variant_); }

 private:
  RunConfig run_;
  Variant variant_;
  ForecasterParams params_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dual external-memory action sequence forecaster";

  static py::exception<Error> base(m, "Error");
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());
  static py::exception<NumericalError> numerical(m, "NumericalError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", numerical.ptr());
  py::register_exception<EvaluationError>(m, "EvaluationError", numerical.ptr());

  py::class_<PySample>(m, "Sample")
      .def(py::init<std::vector<int>, Array>(), py::arg("labels"), py::arg("features"))
      .def_readwrite("labels", &PySample::labels)
      .def_readwrite("features", &PySample::features)
      .def("__len__", [](const PySample& s) { return s.labels.size(); });

  m.def(
      "generate_corpus",
      [](const std::string& grammar, std::size_t length, std::size_t num_train, std::size_t num_test,
         std::size_t feature_dim, double noise, std::uint64_t seed) {
        GrammarMenu menu;
        if (grammar == "composed") {
          menu = composed_grammar();
        } else if (grammar == "cycle") {
          menu = GrammarMenu{{cycle_grammar(3, 4)}, {1.0}};
        } else {
          menu = read_grammar(grammar);
        }
        const Corpus corpus = generate_corpus(menu, CorpusSpec{length, num_train, num_test, feature_dim, noise}, seed);
        std::vector<PySample> train, test;
        for (const auto& s : corpus.train) train.push_back(wrap(s));
        for (const auto& s : corpus.test) test.push_back(wrap(s));
        return py::make_tuple(train, test, corpus.num_classes);
      },
      py::arg("grammar") = "composed", py::arg("length") = 120, py::arg("num_train") = 200, py::arg("num_test") = 50,
      py::arg("feature_dim") = 16, py::arg("noise") = 0.5, py::arg("seed") = 0,
      "Samples (train, test, num_classes). grammar is 'composed', 'cycle' or a grammar file path.");

  m.def(
      "windows",
      [](std::size_t length, double observed, double predicted) {
        const Window w = nmf::windows(length, observed, predicted);
        return py::make_tuple(w.observed, w.predicted);
      },
      py::arg("length"), py::arg("observed_fraction"), py::arg("predicted_fraction"));
  m.def(
      "frame_accuracy",
      [](const std::vector<int>& predicted, const std::vector<int>& truth) {
        return nmf::frame_accuracy(predicted, truth);
      },
      py::arg("predicted"), py::arg("truth"));
  m.def(
      "corrupt_labels",
      [](const std::vector<int>& labels, std::size_t num_classes, double p, std::uint64_t seed) {
        Rng rng(seed);
        return nmf::corrupt_labels(labels, num_classes, p, rng);
      },
      py::arg("labels"), py::arg("num_classes"), py::arg("p"), py::arg("seed") = 0);
  m.def("read_features", [](const std::filesystem::path& p) { return to_array(read_features(p)); });
  m.def("write_features",
        [](const std::filesystem::path& p, const Array& features) { write_features(p, to_tensor(features)); });
  m.def("read_labels", [](const std::filesystem::path& p) { return read_labels(p); });
  m.def("write_labels", [](const std::filesystem::path& p, const std::vector<int>& labels) { write_labels(p, labels); });
  m.def(
      "gradcheck",
      [](std::uint64_t seed, double h, double tolerance) {
        const GradCheckReport r = tiny_model_gradcheck(seed, h, tolerance);
        py::dict per_param;
        for (const auto& p : r.params) per_param[py::str(p.name)] = p.max_relative_error;
        py::dict out;
        out["max_relative_error"] = r.max_relative_error;
        out["pass"] = r.pass;
        out["params"] = per_param;
        return out;
      },
      py::arg("seed") = 0, py::arg("h") = 1e-5, py::arg("tolerance") = 1e-4,
      "Finite-difference check of the tiny full model used by the CLI gradcheck command.");

  py::class_<Forecaster>(m, "Forecaster")
      .def(py::init<const std::string&, std::size_t, std::size_t, const std::string&, std::uint64_t>(),
           py::arg("variant"), py::arg("num_classes"), py::arg("feature_dim"), py::arg("config") = "",
           py::arg("seed") = 0, "config is a JSON run configuration (the same document the CLI reads).")
      .def("fit", &Forecaster::fit, py::arg("samples"), py::arg("seed") = 0, "Returns per-epoch mean losses.")
      .def("evaluate", &Forecaster::evaluate, py::arg("samples"),
           py::arg("observed_fractions") = std::vector<double>{0.2, 0.3},
           py::arg("predicted_fractions") = std::vector<double>{0.1, 0.2, 0.3, 0.5}, py::arg("corruption") = 0.0,
           py::arg("seed") = 0)
      .def("predict", &Forecaster::predict, py::arg("features"), py::arg("labels"), py::arg("horizon"),
           "Greedy rollout after observing the given frames.")
      .def("save", &Forecaster::save)
      .def("load", &Forecaster::load)
      .def_property_readonly("parameter_count", &Forecaster::parameter_count)
      .def_property_readonly("variant", &Forecaster::variant);
}
