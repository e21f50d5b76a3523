#include "phishaudit/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "phishaudit/csv.hpp"
#include "phishaudit/error.hpp"
#include "phishaudit/rng.hpp"

namespace phishaudit {

std::string data_source_name(DataSource s) {
  switch (s) {
    case DataSource::kD1:
      return "D1";
    case DataSource::kD2:
      return "D2";
    case DataSource::kMerge:
      return "Dmerge";
  }
  return "?";
}

DataSource parse_data_source(const std::string& text) {
  if (text == "D1") return DataSource::kD1;
  if (text == "D2") return DataSource::kD2;
  if (text == "Dmerge") return DataSource::kMerge;
  throw Error(ErrorCode::kInvalidArgument, "unknown data source '" + text + "'");
}

std::string feature_set_name(FeatureSet f) { return f == FeatureSet::kAll ? "all" : "common"; }

FeatureSet parse_feature_set(const std::string& text) {
  if (text == "all") return FeatureSet::kAll;
  if (text == "common") return FeatureSet::kCommon;
  throw Error(ErrorCode::kInvalidArgument, "unknown feature set '" + text + "'");
}

nlohmann::ordered_json ExperimentSpec::to_json() const {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["feature_set"] = feature_set_name(feature_set);
  j["train_source"] = data_source_name(train_source);
  j["test_source"] = data_source_name(test_source);
  j["model"] = model;
  j["seed"] = seed;
  j["explain"] = explain;
  return j;
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.id.empty()) throw Error(ErrorCode::kInvalidArgument, "experiment id is empty");
  if (spec.feature_set == FeatureSet::kAll && spec.train_source != spec.test_source) {
    throw Error(ErrorCode::kInvalidArgument,
                spec.id + ": the all-features set cannot cross datasets");
  }
  if (spec.feature_set == FeatureSet::kAll && spec.train_source == DataSource::kMerge) {
    throw Error(ErrorCode::kInvalidArgument, spec.id + ": Dmerge has only common features");
  }
  if (!ModelRegistry::contains(spec.model)) {
    throw Error(ErrorCode::kUnknownModel, spec.id + ": " + spec.model);
  }
  if (spec.explain && spec.model != "gbdt_second") {
    throw Error(ErrorCode::kInvalidArgument,
                spec.id + ": explanations are computed for gbdt_second only");
  }
}

std::vector<ExperimentSpec> canonical_matrix(std::uint64_t seed, const std::string& model) {
  using D = DataSource;
  struct Row {
    const char* id;
    FeatureSet f;
    D train, test;
    std::size_t features;
  };
  const Row rows[] = {
      {"Exp-1", FeatureSet::kAll, D::kD1, D::kD1, 98},
      {"Exp-2", FeatureSet::kAll, D::kD2, D::kD2, 79},
      {"Exp-3", FeatureSet::kCommon, D::kD1, D::kD1, 20},
      {"Exp-4", FeatureSet::kCommon, D::kD2, D::kD2, 20},
      {"Exp-5", FeatureSet::kCommon, D::kD1, D::kD2, 20},
      {"Exp-6", FeatureSet::kCommon, D::kD2, D::kD1, 20},
      {"Exp-7.1", FeatureSet::kCommon, D::kMerge, D::kMerge, 20},
      {"Exp-7.2", FeatureSet::kCommon, D::kMerge, D::kD1, 20},
      {"Exp-7.3", FeatureSet::kCommon, D::kMerge, D::kD2, 20},
  };
  std::vector<ExperimentSpec> out;
  for (const auto& r : rows) {
    ExperimentSpec s;
    s.id = r.id;
    s.feature_set = r.f;
    s.train_source = r.train;
    s.test_source = r.test;
    s.model = model;
    s.seed = seed;
    s.explain = model == "gbdt_second";
    s.reference_features = r.features;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& ModelRegistry::names() {
  static const std::vector<std::string> kNames = {"lr", "dt", "rf", "nb", "gbdt_first",
                                                  "gbdt_second"};
  return kNames;
}

bool ModelRegistry::contains(const std::string& name) {
  const auto& n = names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

Classifier ModelRegistry::train(const std::string& name, const DataTable& train,
                                std::uint64_t seed) const {
  if (name == "lr") return train_logistic_regression(train, configs_.lr);
  if (name == "nb") return train_gaussian_nb(train, configs_.nb);
  if (name == "dt") return train_decision_tree(train, configs_.dt);
  if (name == "rf") {
    auto cfg = configs_.rf;
    cfg.seed = seed;
    cfg.threads = configs_.threads;
    return train_random_forest(train, cfg);
  }
  if (name == "gbdt_first" || name == "gbdt_second") {
    auto cfg = configs_.gbdt;
    cfg.order = name == "gbdt_first" ? GradientOrder::kFirst : GradientOrder::kSecond;
    cfg.seed = seed;
    cfg.threads = configs_.threads;
    return train_gbdt(train, cfg);
  }
  throw Error(ErrorCode::kUnknownModel, name);
}

std::string ModelRegistry::config_key(const std::string& name) const {
  nlohmann::ordered_json j;
  j["model"] = name;
  if (name == "lr") {
    j["epochs"] = configs_.lr.epochs;
    j["step"] = configs_.lr.step;
    j["l2"] = configs_.lr.l2;
  } else if (name == "nb") {
    j["variance_floor"] = configs_.nb.variance_floor;
  } else if (name == "dt") {
    j["max_depth"] = configs_.dt.max_depth;
    j["min_samples_leaf"] = configs_.dt.min_samples_leaf;
  } else if (name == "rf") {
    const auto& c = configs_.rf;
    j["n_trees"] = c.n_trees;
    j["max_depth"] = c.max_depth;
    j["min_samples_leaf"] = c.min_samples_leaf;
    j["mtry"] = c.mtry;
    j["bootstrap"] = c.bootstrap;
  } else if (name == "gbdt_first" || name == "gbdt_second") {
    const auto& c = configs_.gbdt;
    j["n_rounds"] = c.n_rounds;
    j["learning_rate"] = c.learning_rate;
    j["max_depth"] = c.max_depth;
    j["lambda"] = c.lambda;
    j["min_child_weight"] = c.min_child_weight;
    j["min_samples_leaf"] = c.min_samples_leaf;
    j["subsample"] = c.subsample;
  } else {
    throw Error(ErrorCode::kUnknownModel, name);
  }
  return j.dump();
}

std::shared_ptr<const Classifier> ModelCache::find(const std::string& key) const {
  const auto it = models_.find(key);
  return it == models_.end() ? nullptr : it->second;
}

void ModelCache::insert(const std::string& key, std::shared_ptr<const Classifier> model) {
  models_.emplace(key, std::move(model));
}

// ---------------------------------------------------------------------------

ExplanationSample balanced_explanation_sample(const DataTable& test, std::size_t n_per_class,
                                              std::uint64_t seed) {
  std::vector<std::size_t> phishing, benign;
  for (std::size_t i = 0; i < test.n_rows(); ++i) {
    (test.label(i) == kPhishing ? phishing : benign).push_back(i);
  }
  ExplanationSample out;
  out.per_class = std::min({n_per_class, phishing.size(), benign.size()});
  out.clamped = out.per_class < n_per_class;

  Rng rng(seed);
  const auto pick = [&](const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> chosen;
    for (const std::size_t k : rng.sample_without_replacement(rows.size(), out.per_class)) {
      chosen.push_back(rows[k]);
    }
    rng.shuffle(chosen);
    return chosen;
  };
  const auto p = pick(phishing);
  const auto b = pick(benign);
  for (std::size_t i = 0; i < out.per_class; ++i) {
    out.rows.push_back(p[i]);
    out.rows.push_back(b[i]);
  }
  out.table = test.select_rows(out.rows).renamed(test.name() + "_explain");
  return out;
}

const DataTable& train_table(const PreparedData& data, FeatureSet f, DataSource s) {
  if (f == FeatureSet::kAll) {
    if (s == DataSource::kD1) return data.d1_all_train;
    if (s == DataSource::kD2) return data.d2_all_train;
    throw Error(ErrorCode::kInvalidArgument, "Dmerge has only common features");
  }
  switch (s) {
    case DataSource::kD1:
      return data.d1_train;
    case DataSource::kD2:
      return data.d2_train;
    case DataSource::kMerge:
      return data.merge_train;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown data source");
}

const DataTable& test_table(const PreparedData& data, FeatureSet f, DataSource s) {
  if (f == FeatureSet::kAll) {
    if (s == DataSource::kD1) return data.d1_all_test;
    if (s == DataSource::kD2) return data.d2_all_test;
    throw Error(ErrorCode::kInvalidArgument, "Dmerge has only common features");
  }
  switch (s) {
    case DataSource::kD1:
      return data.d1_test;
    case DataSource::kD2:
      return data.d2_test;
    case DataSource::kMerge:
      return data.merge_test;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown data source");
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const PreparedData& data,
                                const ModelRegistry& registry, const ExplainConfig& explain,
                                ModelCache* cache) {
  const auto start = std::chrono::steady_clock::now();
  validate_spec(spec);
  const DataTable& train = train_table(data, spec.feature_set, spec.train_source);
  const DataTable& test = test_table(data, spec.feature_set, spec.test_source);
  if (train.n_rows() == 0 || test.n_rows() == 0) {
    throw Error(ErrorCode::kInsufficientRows, spec.id + ": empty train or test table");
  }
  if (train.column_names() != test.column_names()) {
    throw Error(ErrorCode::kSchemaMismatch, spec.id + ": train and test columns differ");
  }

  ExperimentResult r;
  r.spec = spec;
  r.n_train = train.n_rows();
  r.feature_names = train.column_names();
  const std::string source_tag =
      data_source_name(spec.train_source) + "/" + feature_set_name(spec.feature_set);
  r.model_key = source_tag + "|" + registry.config_key(spec.model) + "|" +
                std::to_string(spec.seed);

  if (cache != nullptr) r.model = cache->find(r.model_key);
  r.model_reused = r.model != nullptr;
  if (!r.model) {
    r.model = std::make_shared<const Classifier>(
        registry.train(spec.model, train, derive_seed(spec.seed, "model|" + source_tag)));
    if (cache != nullptr) cache->insert(r.model_key, r.model);
  }

  r.predictions = predict(*r.model, test);
  r.labels.assign(test.labels().begin(), test.labels().end());
  r.metrics = evaluate(r.predictions.label, r.labels);

  if (spec.explain) {
    const auto& ensemble = std::get<TreeEnsembleModel>(*r.model);
    r.explain_seed = derive_seed(spec.seed, "explain|" + spec.id);
    auto sample = balanced_explanation_sample(test, explain.n_per_class, r.explain_seed);
    if (sample.clamped) {
      r.warnings.push_back(spec.id + ": explanation sample clamped to " +
                           std::to_string(sample.per_class) + " rows per class");
    }
    const auto bg = BackgroundSet::sample(train, explain.background_size,
                                          derive_seed(spec.seed, "background|" + source_tag));
    r.background_size = bg.size();
    r.shap = tree_shap(ensemble, sample.table, bg, explain.threads, sample.rows);
    r.importance = global_importance(*r.shap);
    r.explained = std::move(sample.table);
  }
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

namespace {

void write_json(const nlohmann::ordered_json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

}  // namespace

std::vector<std::string> write_experiment(const ExperimentResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());
  std::vector<std::string> paths;
  const auto path = [&](const char* file) { return (fs::path(dir) / file).string(); };

  nlohmann::ordered_json m;
  m["schema_version"] = 1;
  m["experiment"] = result.spec.to_json();
  m["n_train"] = result.n_train;
  m["n_test"] = result.labels.size();
  m["n_features"] = result.feature_names.size();
  m["model_key"] = result.model_key;
  m["model_reused"] = result.model_reused;
  m["metrics"] = result.metrics.to_json();
  paths.push_back(path("metrics.json"));
  write_json(m, paths.back());

  paths.push_back(path("predictions.csv"));
  {
    std::ofstream out(paths.back(), std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + paths.back());
    csv::write_record(out, {"row", "label", "probability", "predicted"});
    for (std::size_t i = 0; i < result.labels.size(); ++i) {
      csv::write_record(out, {std::to_string(i), std::to_string(result.labels[i]),
                              csv::format_double(result.predictions.probability[i]),
                              std::to_string(result.predictions.label[i])});
    }
    if (!out) throw Error(ErrorCode::kIo, "failed writing " + paths.back());
  }

  paths.push_back(path("model.json"));
  save_model(*result.model, paths.back());

  if (result.shap) {
    paths.push_back(path("shap.csv"));
    write_shap_csv(*result.shap, paths.back());
    paths.push_back(path("shap_header.json"));
    write_json(shap_header(*result.shap, result.explain_seed, result.background_size),
               paths.back());
    paths.push_back(path("importance.json"));
    auto imp = result.importance->to_json();
    imp["experiment"] = result.spec.id;
    write_json(imp, paths.back());
  }
  return paths;
}

// ---------------------------------------------------------------------------

const std::vector<ExperimentPair>& canonical_pairs() {
  static const std::vector<ExperimentPair> kPairs = {{"Exp-3", "Exp-4"},
                                                     {"Exp-4", "Exp-5"},
                                                     {"Exp-3", "Exp-6"},
                                                     {"Exp-7.1", "Exp-3"},
                                                     {"Exp-7.1", "Exp-4"}};
  return kPairs;
}

const std::vector<ExperimentPair>& extra_pairs() {
  static const std::vector<ExperimentPair> kPairs = {
      {"Exp-1", "Exp-2"}, {"Exp-7.1", "Exp-7.2"}, {"Exp-7.1", "Exp-7.3"}};
  return kPairs;
}

std::vector<DivergenceReport> cross_experiment_divergence(
    const std::vector<ExperimentResult>& results, const std::vector<ExperimentPair>& pairs,
    std::size_t k) {
  const auto importance_of = [&](const std::string& id) -> const GlobalImportance& {
    for (const auto& r : results) {
      if (r.spec.id == id && r.importance) return *r.importance;
    }
    throw Error(ErrorCode::kMissingImportance, id + " has no global importance");
  };
  std::vector<DivergenceReport> out;
  for (const auto& [a, b] : pairs) {
    auto report = compare_rankings(importance_of(a), importance_of(b), k);
    report.experiment_a = a;
    report.experiment_b = b;
    out.push_back(std::move(report));
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json ZooTable::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["models"] = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json r;
    r["model"] = row.model;
    r["best"] = row.best;
    r["metrics"] = row.metrics.to_json();
    j["models"].push_back(std::move(r));
  }
  return j;
}

void ZooTable::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  csv::write_record(out, {"dataset", "model", "accuracy", "precision_weighted", "recall_weighted",
                          "f1_weighted", "precision_macro", "recall_macro", "f1_macro", "best"});
  for (const auto& row : rows) {
    const auto& m = row.metrics;
    csv::write_record(
        out, {dataset, row.model, csv::format_double(m.accuracy),
              csv::format_double(m.weighted.precision), csv::format_double(m.weighted.recall),
              csv::format_double(m.weighted.f1), csv::format_double(m.macro.precision),
              csv::format_double(m.macro.recall), csv::format_double(m.macro.f1),
              row.best ? "1" : "0"});
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

ZooTable model_zoo_comparison(const std::string& dataset, const DataTable& train,
                              const DataTable& test, const ModelRegistry& registry,
                              const std::vector<std::string>& models, std::uint64_t seed) {
  for (const auto& name : models) {
    if (!ModelRegistry::contains(name)) throw Error(ErrorCode::kUnknownModel, name);
  }
  ZooTable table;
  table.dataset = dataset;
  for (const auto& name : models) {
    const auto model = registry.train(name, train, derive_seed(seed, "zoo|" + dataset));
    const auto pred = predict(model, test);
    table.rows.push_back({name, evaluate(pred.label, test.labels()), false});
  }
  if (!table.rows.empty()) {
    const auto best = std::max_element(
        table.rows.begin(), table.rows.end(),
        [](const ZooRow& a, const ZooRow& b) { return a.metrics.accuracy < b.metrics.accuracy; });
    best->best = true;
  }
  return table;
}

}  // namespace phishaudit
