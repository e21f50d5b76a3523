#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "phishaudit/data_table.hpp"
#include "phishaudit/models.hpp"
#include "phishaudit/pipeline.hpp"
#include "phishaudit/shap.hpp"

namespace phishaudit {

enum class DataSource { kD1, kD2, kMerge };

std::string data_source_name(DataSource s);  // "D1", "D2", "Dmerge"
DataSource parse_data_source(const std::string& text);
std::string feature_set_name(FeatureSet f);  // "all", "common"
FeatureSet parse_feature_set(const std::string& text);

struct ExperimentSpec {
  std::string id;
  FeatureSet feature_set = FeatureSet::kCommon;
  DataSource train_source = DataSource::kD1;
  DataSource test_source = DataSource::kD1;
  std::string model = "gbdt_second";
  std::uint64_t seed = 0;
  bool explain = true;
  // Column count of the public datasets for this row; other inputs differ.
  std::optional<std::size_t> reference_features;

  nlohmann::ordered_json to_json() const;
};

// Throws Error(kInvalidArgument) when feature_set=all crosses datasets.
void validate_spec(const ExperimentSpec& spec);

// Exp-1 ... Exp-7.3, each carrying `seed` and `model`.
std::vector<ExperimentSpec> canonical_matrix(std::uint64_t seed = 0,
                                             const std::string& model = "gbdt_second");

// ---------------------------------------------------------------------------

struct ModelConfigs {
  DecisionTreeConfig dt;
  RandomForestConfig rf;
  GbdtConfig gbdt;
  LogisticConfig lr;
  NaiveBayesConfig nb;
  std::size_t threads = 0;
};

// Names: lr, dt, rf, nb, gbdt_first, gbdt_second.
class ModelRegistry {
 public:
  explicit ModelRegistry(ModelConfigs configs = {}) : configs_(std::move(configs)) {}

  static const std::vector<std::string>& names();
  static bool contains(const std::string& name);

  // Throws Error(kUnknownModel).
  Classifier train(const std::string& name, const DataTable& train, std::uint64_t seed) const;
  // Canonical text of the effective configuration; equal keys train equal models.
  std::string config_key(const std::string& name) const;
  const ModelConfigs& configs() const { return configs_; }

 private:
  ModelConfigs configs_;
};

// Trained models shared across experiments, keyed by (train source, feature
// set, model config, seed).
class ModelCache {
 public:
  std::shared_ptr<const Classifier> find(const std::string& key) const;
  void insert(const std::string& key, std::shared_ptr<const Classifier> model);
  std::size_t size() const { return models_.size(); }

 private:
  std::map<std::string, std::shared_ptr<const Classifier>> models_;
};

// ---------------------------------------------------------------------------

struct ExplanationSample {
  DataTable table;
  std::vector<std::size_t> rows;  // indices into the source table
  std::size_t per_class = 0;
  bool clamped = false;
};

// Seeded per-class sample without replacement, interleaved phishing, benign,
// phishing, ... n_per_class is clamped to the smaller class count.
ExplanationSample balanced_explanation_sample(const DataTable& test, std::size_t n_per_class,
                                              std::uint64_t seed);

struct ExplainConfig {
  std::size_t n_per_class = 500;
  std::size_t background_size = 128;
  std::size_t threads = 0;
};

struct ExperimentResult {
  ExperimentSpec spec;
  Metrics metrics;
  std::vector<int> labels;  // test labels, row order
  Predictions predictions;
  std::size_t n_train = 0;
  std::vector<std::string> feature_names;
  bool model_reused = false;
  std::string model_key;
  std::shared_ptr<const Classifier> model;
  // Present iff the spec asks for explanations and the model is a tree
  // ensemble.
  std::optional<ShapMatrix> shap;
  std::optional<DataTable> explained;  // rows of `shap`
  std::optional<GlobalImportance> importance;
  std::size_t background_size = 0;
  std::uint64_t explain_seed = 0;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
};

const DataTable& train_table(const PreparedData& data, FeatureSet f, DataSource s);
const DataTable& test_table(const PreparedData& data, FeatureSet f, DataSource s);

// Explanations are computed only for the second-order GBDT. Throws what
// training, prediction or explanation throw (e.g. kSchemaMismatch).
ExperimentResult run_experiment(const ExperimentSpec& spec, const PreparedData& data,
                                const ModelRegistry& registry, const ExplainConfig& explain,
                                ModelCache* cache = nullptr);

// Output files of one experiment under dir; returns their paths. Timing is
// excluded so reruns are byte-identical.
std::vector<std::string> write_experiment(const ExperimentResult& result, const std::string& dir);

// ---------------------------------------------------------------------------

using ExperimentPair = std::pair<std::string, std::string>;

const std::vector<ExperimentPair>& canonical_pairs();
// (Exp-1, Exp-2), (Exp-7.1, Exp-7.2), (Exp-7.1, Exp-7.3).
const std::vector<ExperimentPair>& extra_pairs();

// Throws Error(kMissingImportance) when an id is absent or unexplained.
std::vector<DivergenceReport> cross_experiment_divergence(
    const std::vector<ExperimentResult>& results, const std::vector<ExperimentPair>& pairs,
    std::size_t k = 10);

// ---------------------------------------------------------------------------

struct ZooRow {
  std::string model;
  Metrics metrics;
  bool best = false;  // highest accuracy; first listed wins ties
};

struct ZooTable {
  std::string dataset;
  std::vector<ZooRow> rows;

  nlohmann::ordered_json to_json() const;
  void write_csv(const std::string& path) const;
};

// Throws Error(kUnknownModel) before training anything.
ZooTable model_zoo_comparison(const std::string& dataset, const DataTable& train,
                              const DataTable& test, const ModelRegistry& registry,
                              const std::vector<std::string>& models, std::uint64_t seed);

}  // namespace phishaudit
