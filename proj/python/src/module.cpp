#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "phishaudit/cli.hpp"
#include "phishaudit/config.hpp"
#include "phishaudit/error.hpp"
#include "phishaudit/experiments.hpp"
#include "phishaudit/models.hpp"
#include "phishaudit/pipeline.hpp"
#include "phishaudit/runbook.hpp"
#include "phishaudit/shap.hpp"
#include "phishaudit/synthetic.hpp"
#include "phishaudit/url_features.hpp"

namespace py = pybind11;
using namespace phishaudit;

namespace {

using Matrix = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::object to_python(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

// Rows of a 2-D array as a table over `names`; labels are all benign.
DataTable table_from(const Matrix& x, const std::vector<std::string>& names) {
  if (x.ndim() != 2 || static_cast<std::size_t>(x.shape(1)) != names.size()) {
    throw Error(ErrorCode::kSchemaMismatch,
                "expected an (n, " + std::to_string(names.size()) + ") array");
  }
  const auto n = static_cast<std::size_t>(x.shape(0));
  std::vector<double> v(x.data(), x.data() + n * names.size());
  return DataTable("array", names, std::move(v), std::vector<int>(n, kBenign));
}

py::array_t<double> to_array(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  py::array_t<double> out({rows, cols});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

class Model {
 public:
  explicit Model(Classifier c) : model_(std::move(c)) {}

  static Model train_csv(const std::string& path, const std::string& model, std::uint64_t seed,
                         const std::string& label, const std::string& positive) {
    const auto table = load_csv(path, {.label_column = label, .positive_label = positive});
    return Model(ModelRegistry().train(model, table, seed));
  }
  static Model train_arrays(const Matrix& x, const std::vector<int>& y,
                            const std::vector<std::string>& names, const std::string& model,
                            std::uint64_t seed) {
    const auto unlabelled = table_from(x, names);
    if (y.size() != unlabelled.n_rows()) {
      throw Error(ErrorCode::kLengthMismatch, "y has " + std::to_string(y.size()) + " labels");
    }
    const DataTable t("array", names,
                      std::vector<double>(unlabelled.values().begin(), unlabelled.values().end()),
                      y);
    return Model(ModelRegistry().train(model, t, seed));
  }
  static Model load(const std::string& path) { return Model(load_model(path)); }

  void save(const std::string& path) const { save_model(model_, path); }
  const std::vector<std::string>& names() const { return feature_names(model_); }
  py::array_t<double> predict_proba(const Matrix& x) const {
    const auto p = predict(model_, table_from(x, names()));
    py::array_t<double> out(p.probability.size());
    std::copy(p.probability.begin(), p.probability.end(), out.mutable_data());
    return out;
  }
  py::object to_json() const { return to_python(model_to_json(model_)); }

  const TreeEnsembleModel& ensemble() const {
    const auto* e = std::get_if<TreeEnsembleModel>(&model_);
    if (e == nullptr) throw Error(ErrorCode::kInvalidArgument, "not a tree ensemble");
    return *e;
  }

 private:
  Classifier model_;
};

BackgroundSet background_from(const Model& m, const Matrix& bg) {
  const auto t = table_from(bg, m.names());
  return BackgroundSet(m.names(), std::vector<double>(t.values().begin(), t.values().end()), 0);
}

py::tuple shap_values(const Model& m, const Matrix& x, const Matrix& background,
                      std::size_t threads) {
  const auto table = table_from(x, m.names());
  const auto bg = background_from(m, background);
  ShapMatrix s;
  {
    py::gil_scoped_release release;
    s = tree_shap(m.ensemble(), table, bg, threads);
  }
  return py::make_tuple(to_array(s.values, s.n_rows(), s.n_cols()), s.base_value);
}

py::array_t<double> brute_force(const Model& m, const std::vector<double>& x,
                                const Matrix& background) {
  const auto v = shap_brute_force(m.ensemble(), x, background_from(m, background));
  py::array_t<double> out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::object importance(const Matrix& shap, const std::vector<std::string>& names) {
  ShapMatrix s;
  s.feature_names = names;
  const auto t = table_from(shap, names);
  s.values.assign(t.values().begin(), t.values().end());
  s.instance_ids.resize(t.n_rows());
  for (std::size_t i = 0; i < t.n_rows(); ++i) s.instance_ids[i] = i;
  return to_python(global_importance(s).to_json());
}

py::object compare(const py::object& a, const py::object& b, std::size_t k) {
  return to_python(compare_rankings(GlobalImportance::from_json(from_python(a)),
                                    GlobalImportance::from_json(from_python(b)), k)
                       .to_json());
}

py::object evaluate_labels(const std::vector<int>& predicted, const std::vector<int>& labels) {
  return to_python(evaluate(predicted, labels).to_json());
}

// One dict per URL keyed by feature name; resolved maps a URL to
// (url_google_index, qty_redirects) and unresolved values are NaN.
std::vector<std::map<std::string, double>> extract(
    const std::vector<std::string>& urls,
    const std::map<std::string, std::pair<int, int>>& resolved) {
  const auto kb = KnowledgeBase::load_default();
  std::map<std::string, ExternalValues> table;
  for (const auto& [url, v] : resolved) table[url] = {v.first, v.second};
  const FixtureResolver resolver(std::move(table), FixtureResolver::Fallback::kMissing);
  std::vector<std::map<std::string, double>> out;
  for (const auto& u : urls) out.push_back(extract_all(u, kb, resolver).values);
  return out;
}

std::pair<std::string, std::string> synth(const std::string& dir, std::uint64_t seed,
                                          std::size_t d1_rows, std::size_t d2_rows) {
  SyntheticConfig sc;
  sc.seed = seed;
  sc.d1_rows = d1_rows;
  sc.d2_rows = d2_rows;
  const auto f = write_synthetic(generate_synthetic(sc, SchemaMapping::load_default()), dir);
  return {f.d1_path, f.d2_path};
}

py::object matrix(const std::string& config, std::optional<std::string> out,
                  std::optional<std::uint64_t> seed) {
  auto cfg = RunConfig::load(config);
  if (out) cfg.out_dir = *out;
  if (seed) cfg.seed = *seed;
  {
    py::gil_scoped_release release;
    run_matrix(cfg);
  }
  std::ifstream in(std::filesystem::path(cfg.out_dir) / "summary.json");
  return to_python(nlohmann::ordered_json::parse(in));
}

py::tuple cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = cli_main(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cross-dataset phishing URL classifier audit: feature extraction, models, "
            "interventional tree attributions and the experiment matrix.";

  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def("feature_names", [] { return FeatureSchema::common().names(); },
        "The 20 canonical lexical feature names in schema order.");
  m.def("model_names", [] { return ModelRegistry::names(); });
  m.def("extract_features", &extract, py::arg("urls"),
        py::arg("resolved") = std::map<std::string, std::pair<int, int>>{});

  py::class_<Model>(m, "Model")
      .def_static("train_csv", &Model::train_csv, py::arg("path"),
                  py::arg("model") = "gbdt_second", py::arg("seed") = 0,
                  py::arg("label") = "label", py::arg("positive") = "1")
      .def_static("train", &Model::train_arrays, py::arg("x"), py::arg("y"),
                  py::arg("feature_names"), py::arg("model") = "gbdt_second",
                  py::arg("seed") = 0)
      .def_static("load", &Model::load, py::arg("path"))
      .def("save", &Model::save, py::arg("path"))
      .def_property_readonly("feature_names", &Model::names)
      .def("predict_proba", &Model::predict_proba, py::arg("x"))
      .def("to_json", &Model::to_json);

  m.def("shap_values", &shap_values, py::arg("model"), py::arg("x"), py::arg("background"),
        py::arg("threads") = 0,
        "Interventional attributions in margin units: (values (n, m), base_value).");
  m.def("shap_brute_force", &brute_force, py::arg("model"), py::arg("x"),
        py::arg("background"));
  m.def("global_importance", &importance, py::arg("shap"), py::arg("feature_names"));
  m.def("compare_rankings", &compare, py::arg("a"), py::arg("b"), py::arg("k") = 10);
  m.def("evaluate", &evaluate_labels, py::arg("predicted"), py::arg("labels"));
  m.def("generate_synthetic", &synth, py::arg("dir"), py::arg("seed") = 7,
        py::arg("d1_rows") = 3000, py::arg("d2_rows") = 2000,
        "Writes d1.csv and d2.csv under dir and returns their paths.");
  m.def("run_matrix", &matrix, py::arg("config"), py::arg("out") = py::none(),
        py::arg("seed") = py::none(), "Runs the experiment matrix; returns summary.json.");
  m.def("cli", &cli, py::arg("args"),
        "Runs the command-line tool in-process: (exit code, stdout, stderr).");
}
